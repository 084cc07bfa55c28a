import pytest

from fcbio import _backend


@pytest.fixture(params=_backend.available())
def backend(request):
    """Run the test once per available kernel backend."""
    previous = _backend.current()
    _backend.set_backend(request.param)
    yield request.param
    _backend.set_backend(previous)
