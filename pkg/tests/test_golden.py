import pytest

from make_golden import GOLDEN, outputs
from sarstack.image import decode_pgm
from sarstack.stackfilter import loads_filter

CURRENT = outputs()


@pytest.mark.parametrize("name", sorted(CURRENT))
def test_output_is_byte_identical(name):
    assert CURRENT[name] == (GOLDEN / name).read_bytes()


def test_golden_pgm_headers():
    assert (GOLDEN / "phantom_8bit.pgm").read_bytes().startswith(b"P5\n24 16\n255\n")
    assert (GOLDEN / "phantom_16bit.pgm").read_bytes().startswith(b"P5\n12 8\n65535\n")
    img = decode_pgm((GOLDEN / "phantom_16bit.pgm").read_bytes())
    assert img.levels == 65535 and img.shape == (8, 12)


def test_golden_filters_load():
    f, levels = loads_filter((GOLDEN / "trained_3x3.stackf").read_text())
    assert levels == 255 and f.n == 9
    assert (GOLDEN / "majority_1x3.stackf").read_text() == "STACKF 1\nwindow 1 3\nlevels 255\ne8\n"
