import pytest

from imagegen import make_images


@pytest.fixture
def image_dir(tmp_path):
    make_images(tmp_path / "imgs", 10)
    return tmp_path / "imgs"
