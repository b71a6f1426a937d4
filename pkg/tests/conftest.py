import numpy as np
import pytest

from regada import synth


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def tiny_data(tmp_path_factory):
    """The bundled tiny synthetic dataset written to disk once per session."""
    cfg = synth.SynthConfig(n_adverbs=4, n_actions=6, n_train=300, n_test=120, d_theta=16, d_x=24,
                            t_min=1, t_max=2, distractors=1)
    data = synth.generate(cfg)
    out = tmp_path_factory.mktemp("tiny")
    paths = synth.write(data, out)
    return data, paths


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE

    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
