import pytest

from knnmt.rng import Purpose, step_stream, stream


def test_streams_depend_only_on_their_key() -> None:
    first = stream(7, 1, 2).random(4)
    stream(7, 3, 4).random(100)

    assert stream(7, 1, 2).random(4).tolist() == first.tolist()


@pytest.mark.parametrize("other", [(8, 1, 2), (7, 2, 1), (7, 1, 3)])
def test_different_keys_give_different_streams(other: tuple[int, ...]) -> None:
    assert stream(*other).random(4).tolist() != stream(7, 1, 2).random(4).tolist()


def test_purposes_are_separate_streams() -> None:
    perturb = step_stream(0, 3, 1, 2, 5, Purpose.PERTURB).random(4)
    sample = step_stream(0, 3, 1, 2, 5, Purpose.SAMPLE).random(4)

    assert perturb.tolist() != sample.tolist()


def test_negative_keys_are_rejected() -> None:
    with pytest.raises(ValueError):
        stream(-1)
    with pytest.raises(ValueError):
        stream(0, 2, -3)
