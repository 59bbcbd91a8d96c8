# scene_loader.py
import logging
from pathlib import Path
from typing import Optional, Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from modules.errors import SceneError
from modules.fovea_geometry import PixelGrid
from modules.sensing import Scene
from modules.test_chart import make_test_chart

logger = logging.getLogger(__name__)


class SceneLoader:
    """Reads grayscale scene images and fits them to the simulation grid"""

    def __init__(self):
        # Pillow mode -> full-scale value
        self.full_scale = {
            'L': 255.0,
            '1': 255.0,
            'I;16': 65535.0,
            'I;16L': 65535.0,
            'I;16B': 65535.0,
            'I': 65535.0,
        }
        self.suffixes = {'.pgm', '.png'}

    def load(self, path: Union[str, Path], grid: PixelGrid) -> Scene:
        """
        Load a PGM/PNG scene as f64 in [0, 1] shaped to the grid.
        Larger images are center-cropped; smaller ones are rejected.
        """
        path = Path(path)
        image = self.read_image(path)
        return Scene(image=self.fit_to_grid(image, grid, str(path)), id=path.name)

    def read_image(self, path: Path) -> np.ndarray:
        if path.suffix.lower() not in self.suffixes:
            raise SceneError(f"unsupported scene format '{path.suffix}' (use .pgm or .png)")
        try:
            with Image.open(path) as img:
                img.load()
                mode = img.mode
                if mode == '1':
                    img = img.convert('L')
                if mode not in self.full_scale:
                    raise SceneError(f"scene '{path.name}' is not grayscale (mode {mode})")
                raw = np.array(img)
        except FileNotFoundError:
            raise SceneError(f"scene file not found: {path}")
        except UnidentifiedImageError as e:
            raise SceneError(f"cannot decode scene '{path.name}': {e}")

        scale = self.full_scale[mode]
        data = raw.astype(np.float64)
        if data.size and data.max() > scale:
            raise SceneError(f"scene '{path.name}' has values above the {int(scale)} full scale")
        logger.info("read scene %s (%dx%d, mode %s)", path.name, data.shape[1], data.shape[0], mode)
        return data / scale

    def fit_to_grid(self, image: np.ndarray, grid: PixelGrid, name: str = 'scene') -> np.ndarray:
        h, w = image.shape
        if h < grid.Y or w < grid.X:
            raise SceneError(f"{name} is {w}x{h}, smaller than the {grid.X}x{grid.Y} grid")
        if (h, w) != grid.shape:
            top = (h - grid.Y) // 2
            left = (w - grid.X) // 2
            logger.warning("%s is %dx%d; center-cropping to %dx%d", name, w, h, grid.X, grid.Y)
            image = image[top:top + grid.Y, left:left + grid.X]
        return np.ascontiguousarray(image)

    def load_or_chart(self, path: Optional[Union[str, Path]], grid: PixelGrid, chart_cfg=None) -> Scene:
        """The scene file if given, else the synthetic test chart for the grid"""
        if path is not None:
            return self.load(path, grid)
        kwargs = {}
        if chart_cfg is not None:
            kwargs = {'roi_box': chart_cfg.roi_box, 'periods': chart_cfg.periods, 'digits': chart_cfg.digits}
        logger.info("no scene given; using the synthetic test chart")
        return make_test_chart(grid.X, grid.Y, **kwargs)
