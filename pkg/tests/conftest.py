import numpy as np
import pytest


def write_csv(path, mat, fmt="%.17g"):
    np.savetxt(path, np.asarray(mat), delimiter=",", fmt=fmt)
    return path


@pytest.fixture
def csv_writer(tmp_path):
    def _write(name, mat, fmt="%.17g"):
        return write_csv(tmp_path / name, mat, fmt=fmt)

    return _write
