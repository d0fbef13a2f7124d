"""Session fixtures that train on the synthetic benchmarks once per run."""
import time
from dataclasses import dataclass, field

import pytest

from wtal.checkpoint import ModelCheckpoint
from wtal.data import SynthConfig, synth_dataset
from wtal.pipeline import preset_config, train_detector, train_regressor


@dataclass
class Run:
    seqs: list
    masks: dict
    detector: ModelCheckpoint
    detector_history: list
    seconds: dict = field(default_factory=dict)
    regressor: ModelCheckpoint = None
    regressor_history: list = None
    detector_bytes_before: bytes = None
    detector_bytes_after: bytes = None

    def split(self, name):
        return [s for s in self.seqs if s.split == name]


def _train(cfg_synth, with_regressor):
    _, seqs, masks = synth_dataset(cfg_synth)
    cfg = preset_config("desk")
    t0 = time.perf_counter()
    det, hist = train_detector(seqs, cfg)
    run = Run(seqs, masks, det, hist, {"detector": time.perf_counter() - t0})
    if with_regressor:
        run.detector_bytes_before = det.to_bytes()
        t0 = time.perf_counter()
        run.regressor, run.regressor_history = train_regressor(seqs, det, cfg)
        run.seconds["regressor"] = time.perf_counter() - t0
        run.detector_bytes_after = det.to_bytes()
    return run


@pytest.fixture(scope="session")
def detection_run():
    """40 typical + 40 atypical training videos, 10 + 10 test."""
    return _train(SynthConfig(n_train=[40, 14, 13, 13], n_test=[10, 4, 3, 3], seed=7),
                  with_regressor=False)


@pytest.fixture(scope="session")
def severity_run():
    """Four levels, 20 training and 5 test videos each."""
    return _train(SynthConfig(n_train=20, n_test=5, seed=7), with_regressor=True)


_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def criterion(request):
    """Record one acceptance line, print it, then assert it."""
    lines = request.config.stash[_ACCEPTANCE]

    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance")
        for line in sorted(lines):
            terminalreporter.write_line(line)
