import acceptance_log
import numpy as np
import pytest

from ctxtune.agents.base import Agent
from ctxtune.agents.hyper import HyperDDPG
from ctxtune.nn import AdamState, Mlp, adam_step


class ToyRunner:
    """Stands in for an EpisodeRunner: holds the score of the last interval."""

    def __init__(self):
        self.score = 0.0

    def pop_interval_score(self):
        return self.score


class ToyAgent(Agent):
    """One scalar weight pulled toward a hyperparameter-dependent target.

    Cheap enough to drive many PB2 generations in a unit test while still
    using the real checkpoint machinery.
    """

    algo = "ddpg"
    hyper_cls = HyperDDPG

    def __init__(self, seed):
        super().__init__(HyperDDPG())
        self.net = Mlp([1, 1], rng=np.random.default_rng(seed))
        self.opt = AdamState.create(self.net.params)

    def _networks(self):
        return [self.net]

    def _optimizers(self):
        return [self.opt]

    def learn(self, runner, n_steps):
        hp = self.hyperparams
        target = 1.0 - abs(hp.gamma - 0.9)
        for _ in range(max(1, n_steps // 64)):
            w = self.net.params[0]
            adam_step(self.opt, self.net.params, [2 * (w - target), np.zeros(1)], hp.learning_rate * 10)
        runner.score = -float(abs(self.net.params[0][0, 0] - 1.0))
        return {}

    def predict(self, obs):
        return 0.0


@pytest.fixture
def toy_factory():
    return lambda i: (ToyAgent(i), ToyRunner())


def pytest_terminal_summary(terminalreporter):
    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(acceptance_log.LINES):
            terminalreporter.write_line(line)
