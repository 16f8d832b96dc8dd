"""Per-episode metric records and their CSV round-trip.

`mean_utility` is the per-user trade-off utility averaged over the whole
episode (the learning curves in the result files plot this column); the
reward column additionally carries the per-TS penalty contributions.
Handovers are counted per user per episode.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, fields
from typing import Iterable, Sequence

CSV_COLUMNS = (
    "episode",
    "mean_utility",
    "mean_reward",
    "mean_rate",
    "handovers_per_user",
    "mean_power_w",
    "violations",
    "epsilon",
    "lr",
)

TS_LOG_COLUMNS = ("episode", "t", "mean_utility", "penalty", "reward")


@dataclass
class EpisodeRecord:
    episode: int
    mean_utility: float
    mean_reward: float
    mean_rate: float
    handovers_per_user: float
    mean_power_w: float
    violations: int
    epsilon: float
    lr: float


class MetricAccumulator:
    """Accumulates StepResult streams into one EpisodeRecord per episode."""

    def __init__(self, num_vehicles: int, penalty: float, ts_rows: list | None = None):
        self._k = num_vehicles
        self._penalty = penalty
        self._ts_rows = ts_rows
        self.reset()

    def reset(self) -> None:
        self._t = 0
        self._utility_sum = 0.0
        self._reward_sum = 0.0
        self._rate_sum = 0.0
        self._ho_sum = 0.0
        self._power_sum = 0.0
        self._violations = 0

    def add(self, step, episode: int) -> None:
        self._t += 1
        mean_u = float(step.utilities.mean())
        self._utility_sum += mean_u
        self._reward_sum += step.reward
        self._rate_sum += float(step.rates.mean())
        self._ho_sum += float(step.ho_flags.sum()) / self._k
        self._power_sum += float(step.tx_powers_w.mean())
        self._violations += step.violations.count()
        if self._ts_rows is not None:
            penalty = self._penalty if step.violations else 0.0
            self._ts_rows.append((episode, self._t, mean_u, penalty, step.reward))

    def finalize(self, episode: int, epsilon: float, lr: float) -> EpisodeRecord:
        t = max(self._t, 1)
        record = EpisodeRecord(
            episode=episode,
            mean_utility=self._utility_sum / t,
            mean_reward=self._reward_sum / t,
            mean_rate=self._rate_sum / t,
            handovers_per_user=self._ho_sum,
            mean_power_w=self._power_sum / t,
            violations=self._violations,
            epsilon=epsilon,
            lr=lr,
        )
        self.reset()
        return record


def write_metrics_csv(path, records: Sequence[EpisodeRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in records:
            writer.writerow(
                [r.episode]
                + [repr(float(getattr(r, c))) for c in CSV_COLUMNS[1:6]]
                + [r.violations, repr(float(r.epsilon)), repr(float(r.lr))]
            )


def read_metrics_csv(path) -> list[EpisodeRecord]:
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected metric columns {reader.fieldnames}")
        for row in reader:
            kwargs = {}
            for f in fields(EpisodeRecord):
                raw = row[f.name]
                kwargs[f.name] = int(raw) if f.type == "int" else float(raw)
            records.append(EpisodeRecord(**kwargs))
    return records


def write_ts_log_csv(path, rows: Iterable[tuple]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TS_LOG_COLUMNS)
        for episode, t, mean_utility, penalty, reward in rows:
            writer.writerow(
                [episode, t, repr(float(mean_utility)), repr(float(penalty)), repr(float(reward))]
            )
