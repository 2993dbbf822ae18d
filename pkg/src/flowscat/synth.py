"""Desk-scale synthetic flow generator.

Benign flows are drawn from per-host-pair Gaussian feature profiles;
attack flows come from profiles shifted by anomaly_strength standard
deviations in a random subset of features and are concentrated on a
couple of attacker hosts fanning out to a small victim set (a
scan/flood topology). With anomaly_strength 0 the attack rows are
statistically indistinguishable from benign traffic, which makes the
generator usable as a null control.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
import yaml

from .errors import InvalidConfig

NUMERIC_FEATURES = [
    "IN_BYTES", "OUT_BYTES", "IN_PKTS", "OUT_PKTS", "DURATION_MS",
    "TCP_WIN_MAX", "IAT_AVG_MS", "IAT_STD_MS", "PKT_LEN_MIN",
    "PKT_LEN_MAX", "BYTES_PER_SEC", "PKTS_PER_SEC",
]

SYNTH_SCHEMA_COLUMNS = {
    "SRC_IP": "endpoint",
    "DST_IP": "endpoint",
    "SRC_PORT": "excluded",
    "DST_PORT": "excluded",
    "PROTOCOL": "categorical",
    "L7_PROTO": "categorical",
    **{name: "numeric" for name in NUMERIC_FEATURES},
    "LABEL": "label",
    "ATTACK_TYPE": "attack_type",
}

_PROTOCOLS = np.array(["6", "17", "1"])
_PROTOCOL_P = np.array([0.70, 0.25, 0.05])
_L7 = np.array(["0", "7", "5", "2"])
_L7_P = np.array([0.40, 0.30, 0.20, 0.10])
# fraction of cells blanked or set to Infinity to exercise sanitization
_DIRTY_RATE = 0.002


@dataclass(frozen=True)
class SyntheticSpec:
    n_flows: int = 5000
    n_hosts: int = 0  # 0 = auto: one host per ~10 flows, at least 40
    attack_fraction: float = 0.04
    anomaly_strength: float = 4.0
    seed: int = 0

    def __post_init__(self):
        if self.n_hosts == 0:
            object.__setattr__(self, "n_hosts", max(40, self.n_flows // 10))
        if self.n_flows < 10 or self.n_hosts < 24:
            raise InvalidConfig("need n_flows >= 10 and n_hosts >= 24")
        if not 0.0 < self.attack_fraction < 0.5:
            raise InvalidConfig("attack_fraction must be in (0, 0.5)")
        if self.anomaly_strength < 0:
            raise InvalidConfig("anomaly_strength must be >= 0")


def write_synthetic_schema(path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump({"columns": SYNTH_SCHEMA_COLUMNS}, fh, sort_keys=False)


def generate_synthetic(spec: SyntheticSpec, csv_path,
                       schema_path=None) -> None:
    """Write a labelled flow CSV (and optionally its schema file).

    Attackers and victims are dedicated hosts outside the benign
    service pool, so the attack fan-out stays concentrated. Their flow
    features are drawn from the same per-pair profile law as benign
    traffic plus the anomaly shift, so with anomaly_strength 0 nothing
    separates attack rows from the global benign feature law.
    """
    rng = np.random.default_rng(spec.seed)
    d = len(NUMERIC_FEATURES)

    hosts = [f"10.0.0.{i + 1}" for i in range(spec.n_hosts)]
    n_attackers = max(2, spec.n_hosts // 100)
    n_victims = max(8, spec.n_hosts // 25)
    n_regular = spec.n_hosts - n_attackers - n_victims
    attackers = list(range(spec.n_hosts - n_attackers, spec.n_hosts))
    victims = list(range(n_regular, n_regular + n_victims))

    # global feature scales; per-pair means scatter mildly around them
    base = rng.uniform(50.0, 2000.0, size=d)
    sigma = 0.15 * base

    n_random_pairs = 3 * spec.n_hosts
    pair_src = rng.integers(0, n_regular, size=n_random_pairs).tolist()
    pair_dst = (
        (np.array(pair_src) + 1 + rng.integers(0, n_regular - 1,
                                                size=n_random_pairs))
        % n_regular
    ).tolist()
    attack_pairs = []
    for a in attackers:
        for v in victims:
            pair_src.append(a)
            pair_dst.append(v)
            attack_pairs.append(len(pair_src) - 1)
    n_pairs = len(pair_src)
    pair_means = base * rng.uniform(0.9, 1.1, size=(n_pairs, d))

    # attacks shift a fixed random half of the features by strength*sigma
    shift = np.zeros(d)
    shifted = rng.permutation(d)[: d // 2]
    shift[shifted] = spec.anomaly_strength * sigma[shifted]

    n_attack = math.ceil(spec.attack_fraction * spec.n_flows)
    n_benign = spec.n_flows - n_attack

    rows: list[list[str]] = []
    choice = rng.integers(0, n_random_pairs, size=n_benign)
    for i in range(n_benign):
        p = choice[i]
        feats = rng.normal(pair_means[p], sigma)
        rows.append(_format_row(
            rng, hosts[pair_src[p]], hosts[pair_dst[p]],
            feats, label=0, attack_type="",
        ))
    for i in range(n_attack):
        p = attack_pairs[int(rng.integers(len(attack_pairs)))]
        feats = rng.normal(pair_means[p] + shift, sigma)
        kind = "dos" if rng.random() < 0.5 else "scan"
        rows.append(_format_row(rng, hosts[pair_src[p]], hosts[pair_dst[p]],
                                feats, label=1, attack_type=kind))

    order = rng.permutation(len(rows))
    header = list(SYNTH_SCHEMA_COLUMNS.keys())
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in order:
            writer.writerow(rows[i])

    if schema_path is not None:
        write_synthetic_schema(schema_path)


def _format_row(rng, src, dst, feats, label, attack_type) -> list[str]:
    cells = [
        src, dst,
        str(int(rng.integers(1024, 65535))),
        str(int(rng.integers(1, 65535))),
        str(rng.choice(_PROTOCOLS, p=_PROTOCOL_P)),
        str(rng.choice(_L7, p=_L7_P)),
    ]
    for v in feats:
        r = rng.random()
        if r < _DIRTY_RATE / 2:
            cells.append("")
        elif r < _DIRTY_RATE:
            cells.append("Infinity")
        else:
            cells.append(f"{max(v, 0.0):.4f}")
    cells.append(str(label))
    cells.append(attack_type)
    return cells
