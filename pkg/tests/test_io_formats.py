import numpy as np
import pytest
from PIL import Image

from modules.errors import FormatError
from modules.fourier_engine import PatternSpec, assemble_spectrum, make_frequency_plan, synthesize_uffsi_pattern
from modules.fovea_geometry import compute_weights
from modules.io_formats import (
    load_layout,
    pattern_filename,
    read_measurements_bin,
    read_measurements_csv,
    read_spectrum,
    to_uint8,
    write_gray,
    write_layout,
    write_measurements_bin,
    write_measurements_csv,
    write_reconstruction,
    write_spectrum,
)
from modules.sensing import NoiseConfig, run_acquisition


@pytest.fixture
def acquired(zoo32, rng):
    """Noisy readings and spectrum for each layout of the 32×32 zoo"""
    out = {}
    for name, layout in zoo32.items():
        plan = make_frequency_plan(layout, 0.4)
        m = run_acquisition(rng.random((32, 32)), layout, compute_weights(layout), plan,
                            noise=NoiseConfig(sigma=0.02, seed=11))
        out[name] = (layout, plan, m, assemble_spectrum(m, plan, PatternSpec()))
    return out


def test_layout_container_restores_the_layout(zoo32, tmp_path):
    for name, layout in zoo32.items():
        path = write_layout(tmp_path / f"{name}.bin", layout, compute_weights(layout))
        loaded, weights = load_layout(path)
        assert np.array_equal(loaded.pixel_to_cell, layout.pixel_to_cell)
        assert np.array_equal(loaded.cell_kind, layout.cell_kind)
        assert loaded.lattice == layout.lattice
        assert loaded.structure == layout.structure
        assert loaded.N == layout.N
        assert np.array_equal(weights.w, compute_weights(layout).w)
        assert loaded.summary() == layout.summary()


def test_layout_container_rejects_bad_magic(zoo32, tmp_path):
    path = write_layout(tmp_path / "layout.bin", zoo32['rect'], compute_weights(zoo32['rect']))
    data = bytearray(path.read_bytes())
    data[:4] = b'XXXX'
    path.write_bytes(bytes(data))
    with pytest.raises(FormatError):
        load_layout(path)


def test_layout_container_rejects_truncation(zoo32, tmp_path):
    path = write_layout(tmp_path / "layout.bin", zoo32['circular'], compute_weights(zoo32['circular']))
    path.write_bytes(path.read_bytes()[:100])
    with pytest.raises(FormatError):
        load_layout(path)


def test_measurement_csv_keeps_readings_exact(acquired, tmp_path):
    for name, (layout, plan, m, _) in acquired.items():
        path = write_measurements_csv(tmp_path / f"{name}.csv", m)
        back = read_measurements_csv(path, plan)
        assert np.array_equal(back.readings, m.readings)


def test_measurement_csv_rejects_foreign_plan(acquired, tmp_path):
    layout, plan, m, _ = acquired['rect']
    path = write_measurements_csv(tmp_path / "m.csv", m)
    with pytest.raises(FormatError):
        read_measurements_csv(path, make_frequency_plan(layout, 0.2))


def test_measurement_container_keeps_noise_settings(acquired, tmp_path):
    layout, plan, m, _ = acquired['circular']
    back = read_measurements_bin(write_measurements_bin(tmp_path / "m.bin", m), plan)
    assert np.array_equal(back.readings, m.readings)
    assert back.noise == NoiseConfig(sigma=0.02, seed=11)
    with pytest.raises(FormatError):
        read_measurements_bin(tmp_path / "m.bin", make_frequency_plan(layout, 0.2))


def test_spectrum_container(acquired, tmp_path):
    for name, (_, _, _, spectrum) in acquired.items():
        back = read_spectrum(write_spectrum(tmp_path / f"{name}.sp", spectrum))
        assert np.array_equal(back.coeffs, spectrum.coeffs)
        assert np.array_equal(back.measured_mask, spectrum.measured_mask)
    (tmp_path / "bad.sp").write_bytes(b'UFLY\x01\x00')
    with pytest.raises(FormatError):
        read_spectrum(tmp_path / "bad.sp")


def test_pattern_pgm_reads_back(zoo32, tmp_path):
    layout = zoo32['rotrect']
    weights = compute_weights(layout)
    pattern = synthesize_uffsi_pattern(layout, weights, (1, 2), 0.0, PatternSpec())
    path = write_gray(tmp_path / pattern_filename((1, 2), 0), pattern)
    with Image.open(path) as img:
        assert img.mode == 'L'
        pixels = np.array(img)
    assert np.array_equal(pixels, to_uint8(pattern))
    assert np.max(np.abs(pixels / 255.0 - pattern)) <= 0.5 / 255 + 1e-12


def test_pattern_filenames():
    assert pattern_filename(3, 1) == "pattern_k3_phi090.pgm"
    assert pattern_filename((2, -1), 3) == "pattern_ku2_kv-1_phi270.pgm"
    assert pattern_filename(0, 0) == "pattern_k0_phi000.pgm"


def test_reconstruction_images_are_stretched_to_full_range(tmp_path):
    recon = np.array([[-0.2, 0.1], [0.4, 1.3]])
    with Image.open(write_reconstruction(tmp_path / "r.pgm", recon)) as img:
        pixels = np.array(img)
    assert pixels.tolist() == [[0, 51], [102, 255]]
    with Image.open(write_reconstruction(tmp_path / "flat.pgm", np.full((3, 3), 0.7))) as img:
        assert not np.array(img).any()
