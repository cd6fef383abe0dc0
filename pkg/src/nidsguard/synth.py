"""Surrogate record files in the NSL-KDD and UNSW-NB15 layouts.

The real benchmark files are large downloads that are not always at hand.
These generators write files with the official column layout, label
vocabulary and file names, so every loader, manifest and command can be
exercised offline. They do not reproduce the real data's statistics.

Each traffic profile draws its features group by group. Volume features
(duration, byte and packet counts, connection counts) carry the strongest
class signal. The immutable context groups (protocol/service/flag, content
indicators, error rates, host statistics) each carry a noisier signal: with
probability ``camouflage`` a group of an attack record is drawn from the
benign profile instead, and vice versa with ``benign_noise``. The test files
also contain attack subtypes that never occur in training; their volumes
resemble benign traffic, as KDDTest+ does for several R2L attacks.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .dataset import builtin_manifest


def _draw(spec, n: int, rng: np.random.Generator) -> np.ndarray:
    kind = spec[0]
    if kind == "const":
        return np.full(n, spec[1], dtype=object if isinstance(spec[1], str) else float)
    if kind == "choice":
        vals = list(spec[1])
        w = np.array([spec[1][v] for v in vals], dtype=float)
        return np.array(vals, dtype=object)[rng.choice(len(vals), size=n, p=w / w.sum())]
    if kind == "lognorm":
        _, mu, sd, p0, cap = spec
        v = np.exp(rng.normal(mu, sd, n))
        if cap is not None:
            v = np.minimum(v, cap)
        return np.where(rng.random(n) < p0, 0.0, v)
    if kind == "int":
        return rng.integers(spec[1], spec[2] + 1, n).astype(float)
    if kind == "uniform":
        return rng.uniform(spec[1], spec[2], n)
    if kind == "beta":
        return np.round(rng.beta(spec[1], spec[2], n), 2)
    if kind == "poisson":
        return rng.poisson(spec[1], n).astype(float)
    if kind == "bern":
        return (rng.random(n) < spec[1]).astype(float)
    raise ValueError(f"unknown sampler {kind!r}")


@dataclass(frozen=True)
class Layout:
    """How a dataset's columns split into the volume block and context groups."""

    volume: tuple[str, ...]
    groups: tuple[tuple[str, ...], ...]
    integral: tuple[str, ...]
    derived: tuple[str, ...] = ()


def _sample_rows(profiles: Mapping[str, dict], mix: Mapping[str, float], benign: str, layout: Layout,
                 n: int, rng: np.random.Generator, camouflage: float, benign_noise: float,
                 attack_names: list[str]):
    names = list(mix)
    w = np.array([mix[k] for k in names], dtype=float)
    kinds = rng.choice(len(names), size=n, p=w / w.sum())
    cols: dict[str, np.ndarray] = {}
    all_cols = list(layout.volume) + [c for g in layout.groups for c in g]
    for c in all_cols:
        cols[c] = np.empty(n, dtype=object)
    for k, name in enumerate(names):
        rows = np.flatnonzero(kinds == k)
        if not len(rows):
            continue
        prof = profiles[name]
        for c in layout.volume:
            cols[c][rows] = _draw(prof[c], len(rows), rng)
        for group in layout.groups:
            if name == benign:
                swap = rng.random(len(rows)) < benign_noise
                donors = rng.choice(attack_names, size=len(rows))
            else:
                swap = rng.random(len(rows)) < camouflage
                donors = np.full(len(rows), benign, dtype=object)
            own = rows[~swap]
            for c in group:
                cols[c][own] = _draw(prof[c], len(own), rng)
            for donor in np.unique(donors[swap]) if swap.any() else ():
                sel = rows[swap & (donors == donor)]
                for c in group:
                    cols[c][sel] = _draw(profiles[donor][c], len(sel), rng)
    for c in layout.integral:
        cols[c] = np.round(cols[c].astype(float))
    return [names[k] for k in kinds], cols


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    v = float(v)
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return f"{v:.6g}"


# ---------------------------------------------------------------------------
# NSL-KDD

_NSL_GROUPS = (
    ("protocol_type", "service", "flag", "land", "wrong_fragment", "urgent"),
    ("logged_in", "hot", "num_failed_logins", "num_compromised", "root_shell", "su_attempted",
     "num_root", "num_file_creations", "num_shells", "num_access_files", "num_outbound_cmds",
     "is_host_login", "is_guest_login"),
    ("serror_rate", "srv_serror_rate", "rerror_rate", "srv_rerror_rate"),
    ("same_srv_rate", "diff_srv_rate", "srv_diff_host_rate"),
    ("dst_host_count", "dst_host_srv_count", "dst_host_same_srv_rate", "dst_host_diff_srv_rate"),
    ("dst_host_same_src_port_rate", "dst_host_srv_diff_host_rate", "dst_host_serror_rate",
     "dst_host_srv_serror_rate", "dst_host_rerror_rate", "dst_host_srv_rerror_rate"),
)
NSL_LAYOUT = Layout(
    volume=("duration", "src_bytes", "dst_bytes", "count", "srv_count"),
    groups=_NSL_GROUPS,
    integral=("duration", "src_bytes", "dst_bytes", "count", "srv_count", "dst_host_count",
              "dst_host_srv_count", "hot", "num_failed_logins", "num_compromised", "num_root",
              "num_file_creations", "num_shells", "num_access_files", "wrong_fragment"),
)

_NSL_QUIET = {
    "land": ("const", 0.0), "wrong_fragment": ("const", 0.0), "urgent": ("const", 0.0),
    "logged_in": ("bern", 0.05), "hot": ("const", 0.0), "num_failed_logins": ("const", 0.0),
    "num_compromised": ("const", 0.0), "root_shell": ("const", 0.0), "su_attempted": ("const", 0.0),
    "num_root": ("const", 0.0), "num_file_creations": ("const", 0.0), "num_shells": ("const", 0.0),
    "num_access_files": ("const", 0.0), "num_outbound_cmds": ("const", 0.0),
    "is_host_login": ("const", 0.0), "is_guest_login": ("const", 0.0),
    "duration": ("const", 0.0),
}


def _nsl(**kw) -> dict:
    p = dict(_NSL_QUIET)
    p.update(kw)
    return p


NSL_PROFILES: dict[str, dict] = {
    "normal": _nsl(
        protocol_type=("choice", {"tcp": 0.8, "udp": 0.15, "icmp": 0.05}),
        service=("choice", {"http": 0.45, "smtp": 0.12, "ftp_data": 0.12, "domain_u": 0.1,
                            "private": 0.05, "ftp": 0.05, "telnet": 0.03, "other": 0.08}),
        flag=("choice", {"SF": 0.93, "S1": 0.02, "RSTO": 0.02, "REJ": 0.03}),
        duration=("lognorm", 2.5, 1.8, 0.85, 40000.0),
        src_bytes=("lognorm", 5.6, 0.9, 0.0, 3e6),
        dst_bytes=("lognorm", 7.5, 1.4, 0.12, 5e6),
        count=("lognorm", 1.5, 0.8, 0.0, 511.0), srv_count=("lognorm", 2.0, 0.9, 0.0, 511.0),
        logged_in=("bern", 0.75), hot=("poisson", 0.1), is_guest_login=("bern", 0.005),
        num_file_creations=("poisson", 0.01), num_access_files=("poisson", 0.005),
        serror_rate=("beta", 0.2, 12), srv_serror_rate=("beta", 0.2, 12),
        rerror_rate=("beta", 0.2, 10), srv_rerror_rate=("beta", 0.2, 10),
        same_srv_rate=("beta", 12, 0.4), diff_srv_rate=("beta", 0.3, 10),
        srv_diff_host_rate=("beta", 0.4, 4),
        dst_host_count=("int", 1, 255), dst_host_srv_count=("int", 100, 255),
        dst_host_same_srv_rate=("beta", 8, 0.8), dst_host_diff_srv_rate=("beta", 0.3, 10),
        dst_host_same_src_port_rate=("beta", 0.5, 4), dst_host_srv_diff_host_rate=("beta", 0.5, 8),
        dst_host_serror_rate=("beta", 0.2, 12), dst_host_srv_serror_rate=("beta", 0.2, 12),
        dst_host_rerror_rate=("beta", 0.2, 10), dst_host_srv_rerror_rate=("beta", 0.2, 10),
    ),
    "neptune": _nsl(
        protocol_type=("const", "tcp"),
        service=("choice", {"private": 0.6, "other": 0.1, "telnet": 0.1, "ftp": 0.1, "http": 0.1}),
        flag=("choice", {"S0": 0.85, "REJ": 0.15}),
        src_bytes=("const", 0.0), dst_bytes=("const", 0.0),
        count=("int", 60, 300), srv_count=("int", 1, 30),
        serror_rate=("beta", 12, 0.3), srv_serror_rate=("beta", 12, 0.3),
        rerror_rate=("beta", 0.3, 6), srv_rerror_rate=("beta", 0.3, 6),
        same_srv_rate=("beta", 0.6, 10), diff_srv_rate=("beta", 1, 12), srv_diff_host_rate=("const", 0.0),
        dst_host_count=("const", 255.0), dst_host_srv_count=("int", 1, 30),
        dst_host_same_srv_rate=("beta", 0.6, 10), dst_host_diff_srv_rate=("beta", 1, 12),
        dst_host_same_src_port_rate=("const", 0.0), dst_host_srv_diff_host_rate=("const", 0.0),
        dst_host_serror_rate=("beta", 12, 0.3), dst_host_srv_serror_rate=("beta", 12, 0.3),
        dst_host_rerror_rate=("beta", 0.3, 6), dst_host_srv_rerror_rate=("beta", 0.3, 6),
    ),
    "smurf": _nsl(
        protocol_type=("const", "icmp"), service=("const", "ecr_i"), flag=("const", "SF"),
        src_bytes=("choice", {520.0: 0.5, 1032.0: 0.5}), dst_bytes=("const", 0.0),
        count=("int", 150, 420), srv_count=("int", 150, 420),
        serror_rate=("const", 0.0), srv_serror_rate=("const", 0.0),
        rerror_rate=("const", 0.0), srv_rerror_rate=("const", 0.0),
        same_srv_rate=("const", 1.0), diff_srv_rate=("const", 0.0), srv_diff_host_rate=("const", 0.0),
        dst_host_count=("const", 255.0), dst_host_srv_count=("const", 255.0),
        dst_host_same_srv_rate=("const", 1.0), dst_host_diff_srv_rate=("const", 0.0),
        dst_host_same_src_port_rate=("beta", 10, 0.5), dst_host_srv_diff_host_rate=("const", 0.0),
        dst_host_serror_rate=("const", 0.0), dst_host_srv_serror_rate=("const", 0.0),
        dst_host_rerror_rate=("const", 0.0), dst_host_srv_rerror_rate=("const", 0.0),
    ),
    "satan": _nsl(
        protocol_type=("choice", {"tcp": 0.8, "udp": 0.2}), service=("choice", {"private": 0.5, "other": 0.5}),
        flag=("choice", {"REJ": 0.6, "S0": 0.2, "RSTR": 0.2}),
        src_bytes=("lognorm", 1.5, 1.0, 0.5, 200.0), dst_bytes=("lognorm", 2.0, 1.0, 0.6, 300.0),
        count=("int", 1, 40), srv_count=("int", 1, 10),
        serror_rate=("beta", 1, 4), srv_serror_rate=("beta", 1, 4),
        rerror_rate=("beta", 4, 1), srv_rerror_rate=("beta", 4, 1),
        same_srv_rate=("beta", 0.5, 6), diff_srv_rate=("beta", 3, 2), srv_diff_host_rate=("beta", 0.5, 3),
        dst_host_count=("int", 100, 255), dst_host_srv_count=("int", 1, 20),
        dst_host_same_srv_rate=("beta", 0.5, 10), dst_host_diff_srv_rate=("beta", 3, 3),
        dst_host_same_src_port_rate=("beta", 1, 6), dst_host_srv_diff_host_rate=("beta", 0.5, 8),
        dst_host_serror_rate=("beta", 1, 4), dst_host_srv_serror_rate=("beta", 1, 4),
        dst_host_rerror_rate=("beta", 4, 1), dst_host_srv_rerror_rate=("beta", 4, 1),
    ),
    "ipsweep": _nsl(
        protocol_type=("const", "icmp"), service=("choice", {"eco_i": 0.9, "ecr_i": 0.1}), flag=("const", "SF"),
        src_bytes=("int", 8, 20), dst_bytes=("const", 0.0),
        count=("int", 1, 4), srv_count=("int", 1, 40),
        serror_rate=("const", 0.0), srv_serror_rate=("const", 0.0),
        rerror_rate=("const", 0.0), srv_rerror_rate=("const", 0.0),
        same_srv_rate=("const", 1.0), diff_srv_rate=("const", 0.0), srv_diff_host_rate=("beta", 6, 1),
        dst_host_count=("int", 1, 60), dst_host_srv_count=("int", 1, 60),
        dst_host_same_srv_rate=("beta", 6, 1), dst_host_diff_srv_rate=("beta", 0.5, 6),
        dst_host_same_src_port_rate=("beta", 6, 1), dst_host_srv_diff_host_rate=("beta", 4, 2),
        dst_host_serror_rate=("const", 0.0), dst_host_srv_serror_rate=("const", 0.0),
        dst_host_rerror_rate=("beta", 0.2, 8), dst_host_srv_rerror_rate=("beta", 0.2, 8),
    ),
    "portsweep": _nsl(
        protocol_type=("const", "tcp"), service=("choice", {"private": 0.7, "other": 0.3}),
        flag=("choice", {"RSTR": 0.6, "REJ": 0.3, "SH": 0.1}),
        duration=("lognorm", 1.0, 2.0, 0.7, 40000.0),
        src_bytes=("const", 0.0), dst_bytes=("const", 0.0),
        count=("int", 1, 5), srv_count=("int", 1, 5),
        serror_rate=("beta", 0.5, 4), srv_serror_rate=("beta", 0.5, 4),
        rerror_rate=("beta", 5, 1), srv_rerror_rate=("beta", 5, 1),
        same_srv_rate=("beta", 5, 1), diff_srv_rate=("beta", 0.5, 5), srv_diff_host_rate=("beta", 0.5, 5),
        dst_host_count=("int", 1, 255), dst_host_srv_count=("int", 1, 10),
        dst_host_same_srv_rate=("beta", 0.5, 8), dst_host_diff_srv_rate=("beta", 1, 3),
        dst_host_same_src_port_rate=("beta", 4, 1), dst_host_srv_diff_host_rate=("beta", 0.5, 8),
        dst_host_serror_rate=("beta", 0.5, 4), dst_host_srv_serror_rate=("beta", 0.5, 4),
        dst_host_rerror_rate=("beta", 5, 1), dst_host_srv_rerror_rate=("beta", 5, 1),
    ),
    "back": _nsl(
        protocol_type=("const", "tcp"), service=("const", "http"), flag=("choice", {"SF": 0.8, "RSTR": 0.2}),
        src_bytes=("lognorm", 10.9, 0.05, 0.0, 1e6), dst_bytes=("lognorm", 9.0, 0.1, 0.0, 1e6),
        count=("int", 1, 20), srv_count=("int", 1, 20), logged_in=("const", 1.0),
        hot=("int", 2, 2), num_compromised=("int", 1, 1),
        serror_rate=("beta", 0.2, 10), srv_serror_rate=("beta", 0.2, 10),
        rerror_rate=("beta", 0.2, 10), srv_rerror_rate=("beta", 0.2, 10),
        same_srv_rate=("const", 1.0), diff_srv_rate=("const", 0.0), srv_diff_host_rate=("beta", 0.3, 5),
        dst_host_count=("int", 1, 255), dst_host_srv_count=("int", 1, 255),
        dst_host_same_srv_rate=("beta", 6, 1), dst_host_diff_srv_rate=("beta", 0.3, 10),
        dst_host_same_src_port_rate=("beta", 0.3, 8), dst_host_srv_diff_host_rate=("beta", 0.3, 8),
        dst_host_serror_rate=("beta", 0.2, 10), dst_host_srv_serror_rate=("beta", 0.2, 10),
        dst_host_rerror_rate=("beta", 0.5, 5), dst_host_srv_rerror_rate=("beta", 0.5, 5),
    ),
    "teardrop": _nsl(
        protocol_type=("const", "udp"), service=("const", "private"), flag=("const", "SF"),
        wrong_fragment=("int", 1, 3), src_bytes=("int", 28, 28), dst_bytes=("const", 0.0),
        count=("int", 1, 100), srv_count=("int", 1, 100),
        serror_rate=("const", 0.0), srv_serror_rate=("const", 0.0),
        rerror_rate=("const", 0.0), srv_rerror_rate=("const", 0.0),
        same_srv_rate=("beta", 4, 1), diff_srv_rate=("beta", 0.5, 5), srv_diff_host_rate=("const", 0.0),
        dst_host_count=("int", 1, 255), dst_host_srv_count=("int", 1, 100),
        dst_host_same_srv_rate=("beta", 2, 2), dst_host_diff_srv_rate=("beta", 0.5, 5),
        dst_host_same_src_port_rate=("beta", 3, 1), dst_host_srv_diff_host_rate=("const", 0.0),
        dst_host_serror_rate=("const", 0.0), dst_host_srv_serror_rate=("const", 0.0),
        dst_host_rerror_rate=("const", 0.0), dst_host_srv_rerror_rate=("const", 0.0),
    ),
    "warezclient": _nsl(
        protocol_type=("const", "tcp"), service=("choice", {"ftp_data": 0.6, "ftp": 0.4}), flag=("const", "SF"),
        duration=("lognorm", 6.0, 1.0, 0.2, 40000.0),
        src_bytes=("lognorm", 11.5, 1.0, 0.0, 3e6), dst_bytes=("lognorm", 1.0, 1.0, 0.8, 5e6),
        count=("int", 1, 5), srv_count=("int", 1, 5), logged_in=("const", 1.0),
        hot=("poisson", 2.0), is_guest_login=("bern", 0.6), num_file_creations=("poisson", 0.5),
        serror_rate=("const", 0.0), srv_serror_rate=("const", 0.0),
        rerror_rate=("const", 0.0), srv_rerror_rate=("const", 0.0),
        same_srv_rate=("const", 1.0), diff_srv_rate=("const", 0.0), srv_diff_host_rate=("const", 0.0),
        dst_host_count=("int", 1, 100), dst_host_srv_count=("int", 1, 60),
        dst_host_same_srv_rate=("beta", 2, 2), dst_host_diff_srv_rate=("beta", 0.5, 5),
        dst_host_same_src_port_rate=("beta", 2, 2), dst_host_srv_diff_host_rate=("beta", 0.5, 5),
        dst_host_serror_rate=("const", 0.0), dst_host_srv_serror_rate=("const", 0.0),
        dst_host_rerror_rate=("const", 0.0), dst_host_srv_rerror_rate=("const", 0.0),
    ),
    "guess_passwd": _nsl(
        protocol_type=("const", "tcp"), service=("choice", {"telnet": 0.7, "ftp": 0.15, "imap4": 0.15}),
        flag=("choice", {"RSTO": 0.6, "SF": 0.4}),
        duration=("int", 1, 5), src_bytes=("int", 100, 140), dst_bytes=("int", 150, 200),
        count=("int", 1, 3), srv_count=("int", 1, 3),
        num_failed_logins=("int", 1, 1), hot=("poisson", 0.5),
        serror_rate=("const", 0.0), srv_serror_rate=("const", 0.0),
        rerror_rate=("beta", 1, 2), srv_rerror_rate=("beta", 1, 2),
        same_srv_rate=("const", 1.0), diff_srv_rate=("const", 0.0), srv_diff_host_rate=("const", 0.0),
        dst_host_count=("int", 1, 255), dst_host_srv_count=("int", 1, 255),
        dst_host_same_srv_rate=("beta", 4, 1), dst_host_diff_srv_rate=("beta", 0.5, 8),
        dst_host_same_src_port_rate=("beta", 0.5, 8), dst_host_srv_diff_host_rate=("beta", 0.5, 8),
        dst_host_serror_rate=("const", 0.0), dst_host_srv_serror_rate=("const", 0.0),
        dst_host_rerror_rate=("beta", 3, 1), dst_host_srv_rerror_rate=("beta", 3, 1),
    ),
    "buffer_overflow": _nsl(
        protocol_type=("const", "tcp"), service=("choice", {"telnet": 0.8, "ftp_data": 0.2}),
        flag=("const", "SF"), duration=("lognorm", 5.0, 1.0, 0.1, 40000.0),
        src_bytes=("lognorm", 7.5, 0.8, 0.0, 3e6), dst_bytes=("lognorm", 8.5, 0.8, 0.0, 5e6),
        count=("int", 1, 3), srv_count=("int", 1, 3), logged_in=("const", 1.0),
        hot=("int", 1, 6), root_shell=("bern", 0.8), num_file_creations=("int", 1, 4), num_shells=("bern", 0.3),
        num_compromised=("int", 1, 3),
        serror_rate=("const", 0.0), srv_serror_rate=("const", 0.0),
        rerror_rate=("const", 0.0), srv_rerror_rate=("const", 0.0),
        same_srv_rate=("const", 1.0), diff_srv_rate=("const", 0.0), srv_diff_host_rate=("const", 0.0),
        dst_host_count=("int", 1, 30), dst_host_srv_count=("int", 1, 30),
        dst_host_same_srv_rate=("beta", 2, 2), dst_host_diff_srv_rate=("beta", 1, 4),
        dst_host_same_src_port_rate=("beta", 1, 4), dst_host_srv_diff_host_rate=("beta", 0.5, 8),
        dst_host_serror_rate=("const", 0.0), dst_host_srv_serror_rate=("const", 0.0),
        dst_host_rerror_rate=("const", 0.0), dst_host_srv_rerror_rate=("const", 0.0),
    ),
}

# test-only subtypes: traffic volumes sit inside the benign range, context stays attack-like
NSL_PROFILES["mscan"] = dict(NSL_PROFILES["satan"], src_bytes=("lognorm", 5.5, 0.8, 0.0, 3e6),
                             dst_bytes=("lognorm", 7.0, 1.0, 0.2, 5e6), count=("int", 2, 20))
NSL_PROFILES["apache2"] = dict(NSL_PROFILES["back"], src_bytes=("lognorm", 5.8, 0.6, 0.0, 3e6),
                               dst_bytes=("lognorm", 7.8, 0.8, 0.0, 5e6))
NSL_PROFILES["processtable"] = dict(NSL_PROFILES["neptune"], duration=("lognorm", 6.0, 1.0, 0.0, 40000.0),
                                    count=("int", 1, 15), srv_count=("int", 1, 15))
NSL_PROFILES["snmpguess"] = dict(NSL_PROFILES["guess_passwd"], protocol_type=("const", "udp"),
                                 service=("const", "snmp"), src_bytes=("lognorm", 5.0, 0.5, 0.0, 3e6),
                                 dst_bytes=("lognorm", 6.0, 0.8, 0.3, 5e6))
NSL_PROFILES["warezmaster"] = dict(NSL_PROFILES["warezclient"], src_bytes=("lognorm", 6.0, 1.0, 0.0, 3e6),
                                   dst_bytes=("lognorm", 8.0, 1.0, 0.1, 5e6),
                                   duration=("lognorm", 3.0, 1.5, 0.5, 40000.0))

NSL_TRAIN_MIX = {"normal": 0.535, "neptune": 0.22, "smurf": 0.06, "satan": 0.03, "ipsweep": 0.03,
                 "portsweep": 0.025, "back": 0.02, "teardrop": 0.02, "warezclient": 0.03,
                 "guess_passwd": 0.006, "buffer_overflow": 0.004}
NSL_TEST_MIX = {"normal": 0.43, "neptune": 0.16, "smurf": 0.03, "satan": 0.03, "ipsweep": 0.02,
                "portsweep": 0.02, "back": 0.015, "teardrop": 0.005, "warezclient": 0.01,
                "guess_passwd": 0.04, "buffer_overflow": 0.01, "mscan": 0.05, "apache2": 0.035,
                "processtable": 0.03, "snmpguess": 0.04, "warezmaster": 0.035}

NSL_COLUMNS = [c.name for c in builtin_manifest("nsl_kdd").columns]


def nsl_kdd_rows(n: int, test: bool, seed: int, camouflage: float = 0.15, benign_noise: float = 0.04):
    rng = np.random.default_rng(seed)
    mix = NSL_TEST_MIX if test else NSL_TRAIN_MIX
    attacks = [k for k in NSL_TRAIN_MIX if k != "normal"]
    labels, cols = _sample_rows(NSL_PROFILES, mix, "normal", NSL_LAYOUT, n, rng, camouflage,
                                benign_noise, attacks)
    difficulty = rng.integers(0, 22, n)
    feats = NSL_COLUMNS[:-2]
    for i in range(n):
        yield [_fmt(cols[c][i]) for c in feats] + [labels[i], str(difficulty[i])]


def write_nsl_kdd(out_dir: str | Path, n_train: int = 30000, n_test: int = 8000, seed: int = 0,
                  **kw) -> tuple[Path, Path]:
    """Write ``KDDTrain+.txt`` and ``KDDTest+.txt`` (no header, 43 columns)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = out_dir / "KDDTrain+.txt", out_dir / "KDDTest+.txt"
    for path, n, test, s in ((paths[0], n_train, False, seed), (paths[1], n_test, True, seed + 1)):
        with open(path, "w", newline="") as f:
            csv.writer(f).writerows(nsl_kdd_rows(n, test, s, **kw))
    return paths


# ---------------------------------------------------------------------------
# UNSW-NB15 (training/testing partition layout)

UNSW_COLUMNS = [c.name for c in builtin_manifest("unsw_nb15").columns]

UNSW_LAYOUT = Layout(
    volume=("dur", "sbytes", "dbytes", "spkts", "dpkts"),
    groups=(
        ("proto", "service", "state", "is_sm_ips_ports"),
        ("sttl", "dttl", "ct_state_ttl"),
        ("swin", "dwin", "stcpb", "dtcpb", "tcprtt", "synack", "ackdat"),
        ("smean", "dmean", "sload", "dload", "sinpkt", "dinpkt"),
        ("sloss", "dloss", "sjit", "djit", "trans_depth", "response_body_len", "is_ftp_login",
         "ct_ftp_cmd", "ct_flw_http_mthd"),
        ("ct_srv_src", "ct_dst_ltm", "ct_src_dport_ltm", "ct_dst_sport_ltm", "ct_dst_src_ltm",
         "ct_src_ltm", "ct_srv_dst"),
    ),
    integral=("sbytes", "dbytes", "spkts", "dpkts", "sttl", "dttl", "ct_state_ttl", "swin", "dwin",
              "stcpb", "dtcpb", "smean", "dmean", "sloss", "dloss", "trans_depth", "response_body_len",
              "is_ftp_login", "ct_ftp_cmd", "ct_flw_http_mthd", "ct_srv_src", "ct_dst_ltm",
              "ct_src_dport_ltm", "ct_dst_sport_ltm", "ct_dst_src_ltm", "ct_src_ltm", "ct_srv_dst"),
)

_UNSW_BASE = {
    "is_sm_ips_ports": ("const", 0.0), "stcpb": ("int", 0, 4294967295), "dtcpb": ("int", 0, 4294967295),
    "sloss": ("poisson", 1.0), "dloss": ("poisson", 1.0), "trans_depth": ("const", 0.0),
    "response_body_len": ("const", 0.0), "is_ftp_login": ("const", 0.0), "ct_ftp_cmd": ("const", 0.0),
    "ct_flw_http_mthd": ("const", 0.0), "sjit": ("lognorm", 3.0, 2.0, 0.3, 1e6),
    "djit": ("lognorm", 3.0, 2.0, 0.3, 1e6),
}


def _unsw(**kw) -> dict:
    p = dict(_UNSW_BASE)
    p.update(kw)
    return p


UNSW_PROFILES: dict[str, dict] = {
    "Normal": _unsw(
        proto=("choice", {"tcp": 0.7, "udp": 0.25, "arp": 0.03, "ospf": 0.02}),
        service=("choice", {"-": 0.5, "http": 0.15, "ftp": 0.05, "ftp-data": 0.1, "smtp": 0.08, "dns": 0.12}),
        state=("choice", {"FIN": 0.65, "CON": 0.2, "INT": 0.1, "REQ": 0.05}),
        dur=("lognorm", -1.0, 1.8, 0.05, 60.0),
        sbytes=("lognorm", 7.2, 1.3, 0.0, 1.5e7), dbytes=("lognorm", 8.5, 1.8, 0.08, 1.5e7),
        spkts=("lognorm", 2.6, 0.9, 0.0, 10000.0), dpkts=("lognorm", 2.8, 1.1, 0.05, 10000.0),
        sttl=("choice", {31.0: 0.7, 62.0: 0.25, 254.0: 0.05}), dttl=("choice", {29.0: 0.7, 252.0: 0.3}),
        ct_state_ttl=("choice", {0.0: 0.9, 1.0: 0.1}),
        swin=("choice", {255.0: 0.8, 0.0: 0.2}), dwin=("choice", {255.0: 0.8, 0.0: 0.2}),
        tcprtt=("uniform", 0.0, 0.2), synack=("uniform", 0.0, 0.1), ackdat=("uniform", 0.0, 0.1),
        smean=("lognorm", 4.8, 0.7, 0.0, 1500.0), dmean=("lognorm", 5.8, 1.0, 0.05, 1500.0),
        sload=("lognorm", 10.0, 2.5, 0.0, 5e9), dload=("lognorm", 11.0, 2.5, 0.05, 5e9),
        sinpkt=("lognorm", 3.0, 2.0, 0.0, 6e4), dinpkt=("lognorm", 3.0, 2.0, 0.0, 6e4),
        trans_depth=("bern", 0.2), response_body_len=("lognorm", 6.0, 2.0, 0.8, 1e6),
        ct_flw_http_mthd=("bern", 0.15), is_ftp_login=("bern", 0.03), ct_ftp_cmd=("bern", 0.03),
        ct_srv_src=("int", 1, 20), ct_dst_ltm=("int", 1, 8), ct_src_dport_ltm=("int", 1, 4),
        ct_dst_sport_ltm=("int", 1, 3), ct_dst_src_ltm=("int", 1, 12), ct_src_ltm=("int", 1, 10),
        ct_srv_dst=("int", 1, 20),
    ),
    "Generic": _unsw(
        proto=("const", "udp"), service=("const", "dns"), state=("const", "INT"),
        dur=("lognorm", -12.0, 1.0, 0.3, 60.0),
        sbytes=("choice", {114.0: 0.8, 146.0: 0.2}), dbytes=("const", 0.0),
        spkts=("const", 2.0), dpkts=("const", 0.0),
        sttl=("const", 254.0), dttl=("const", 0.0), ct_state_ttl=("const", 2.0),
        swin=("const", 0.0), dwin=("const", 0.0), tcprtt=("const", 0.0), synack=("const", 0.0),
        ackdat=("const", 0.0), sloss=("const", 0.0), dloss=("const", 0.0),
        smean=("choice", {57.0: 0.8, 73.0: 0.2}), dmean=("const", 0.0),
        sload=("lognorm", 18.0, 1.0, 0.0, 5e9), dload=("const", 0.0),
        sinpkt=("uniform", 0.0, 0.01), dinpkt=("const", 0.0), sjit=("const", 0.0), djit=("const", 0.0),
        ct_srv_src=("int", 10, 60), ct_dst_ltm=("int", 10, 60), ct_src_dport_ltm=("int", 10, 60),
        ct_dst_sport_ltm=("int", 10, 60), ct_dst_src_ltm=("int", 10, 60), ct_src_ltm=("int", 10, 60),
        ct_srv_dst=("int", 10, 60),
    ),
    "Exploits": _unsw(
        proto=("choice", {"tcp": 0.9, "udp": 0.1}), service=("choice", {"http": 0.4, "-": 0.5, "smtp": 0.1}),
        state=("choice", {"FIN": 0.7, "INT": 0.3}),
        dur=("lognorm", 0.3, 1.0, 0.1, 60.0),
        sbytes=("lognorm", 7.2, 0.5, 0.0, 1.5e7), dbytes=("lognorm", 5.0, 1.0, 0.3, 1.5e7),
        spkts=("int", 8, 14), dpkts=("int", 1, 8),
        sttl=("const", 254.0), dttl=("const", 252.0), ct_state_ttl=("const", 1.0),
        swin=("const", 255.0), dwin=("const", 255.0),
        tcprtt=("uniform", 0.05, 0.2), synack=("uniform", 0.03, 0.1), ackdat=("uniform", 0.02, 0.1),
        smean=("lognorm", 5.3, 0.3, 0.0, 1500.0), dmean=("lognorm", 4.0, 0.6, 0.3, 1500.0),
        sload=("lognorm", 9.0, 1.5, 0.0, 5e9), dload=("lognorm", 8.0, 1.5, 0.3, 5e9),
        sinpkt=("lognorm", 3.5, 1.0, 0.0, 6e4), dinpkt=("lognorm", 3.5, 1.0, 0.0, 6e4),
        trans_depth=("bern", 0.4), ct_flw_http_mthd=("bern", 0.3),
        ct_srv_src=("int", 1, 10), ct_dst_ltm=("int", 1, 5), ct_src_dport_ltm=("int", 1, 3),
        ct_dst_sport_ltm=("int", 1, 2), ct_dst_src_ltm=("int", 1, 6), ct_src_ltm=("int", 1, 5),
        ct_srv_dst=("int", 1, 10),
    ),
    "Fuzzers": _unsw(
        proto=("choice", {"tcp": 0.6, "udp": 0.4}), service=("const", "-"),
        state=("choice", {"INT": 0.6, "FIN": 0.4}),
        dur=("lognorm", 0.5, 1.2, 0.2, 60.0),
        sbytes=("lognorm", 6.8, 0.9, 0.0, 1.5e7), dbytes=("lognorm", 3.5, 1.5, 0.6, 1.5e7),
        spkts=("int", 2, 30), dpkts=("int", 0, 4),
        sttl=("const", 254.0), dttl=("choice", {0.0: 0.6, 252.0: 0.4}), ct_state_ttl=("choice", {2.0: 0.6, 1.0: 0.4}),
        swin=("choice", {0.0: 0.6, 255.0: 0.4}), dwin=("choice", {0.0: 0.6, 255.0: 0.4}),
        tcprtt=("uniform", 0.0, 0.1), synack=("uniform", 0.0, 0.05), ackdat=("uniform", 0.0, 0.05),
        smean=("lognorm", 4.8, 0.8, 0.0, 1500.0), dmean=("lognorm", 3.0, 1.0, 0.6, 1500.0),
        sload=("lognorm", 11.0, 2.0, 0.0, 5e9), dload=("lognorm", 4.0, 2.0, 0.6, 5e9),
        sinpkt=("lognorm", 5.0, 1.5, 0.0, 6e4), dinpkt=("lognorm", 4.0, 1.5, 0.6, 6e4),
        ct_srv_src=("int", 1, 8), ct_dst_ltm=("int", 1, 4), ct_src_dport_ltm=("int", 1, 3),
        ct_dst_sport_ltm=("int", 1, 2), ct_dst_src_ltm=("int", 1, 4), ct_src_ltm=("int", 1, 4),
        ct_srv_dst=("int", 1, 8),
    ),
    "Reconnaissance": _unsw(
        proto=("choice", {"tcp": 0.6, "udp": 0.3, "icmp": 0.1}), service=("const", "-"),
        state=("choice", {"INT": 0.7, "FIN": 0.3}),
        dur=("lognorm", -5.0, 2.0, 0.3, 60.0),
        sbytes=("lognorm", 5.3, 0.6, 0.0, 1.5e7), dbytes=("lognorm", 4.5, 0.5, 0.5, 1.5e7),
        spkts=("int", 2, 6), dpkts=("int", 0, 4),
        sttl=("const", 254.0), dttl=("choice", {0.0: 0.5, 252.0: 0.5}), ct_state_ttl=("choice", {2.0: 0.5, 1.0: 0.5}),
        swin=("choice", {0.0: 0.5, 255.0: 0.5}), dwin=("choice", {0.0: 0.5, 255.0: 0.5}),
        tcprtt=("uniform", 0.0, 0.1), synack=("uniform", 0.0, 0.05), ackdat=("uniform", 0.0, 0.05),
        smean=("lognorm", 4.0, 0.4, 0.0, 1500.0), dmean=("lognorm", 3.5, 0.5, 0.5, 1500.0),
        sload=("lognorm", 12.0, 2.0, 0.0, 5e9), dload=("lognorm", 6.0, 2.0, 0.5, 5e9),
        sinpkt=("lognorm", 2.0, 2.0, 0.0, 6e4), dinpkt=("lognorm", 2.0, 2.0, 0.5, 6e4),
        ct_srv_src=("int", 1, 30), ct_dst_ltm=("int", 1, 30), ct_src_dport_ltm=("int", 1, 30),
        ct_dst_sport_ltm=("int", 1, 10), ct_dst_src_ltm=("int", 1, 30), ct_src_ltm=("int", 1, 30),
        ct_srv_dst=("int", 1, 30),
    ),
    "DoS": _unsw(
        proto=("choice", {"tcp": 0.7, "udp": 0.3}), service=("choice", {"-": 0.7, "http": 0.3}),
        state=("choice", {"FIN": 0.5, "INT": 0.5}),
        dur=("lognorm", -0.5, 1.5, 0.2, 60.0),
        sbytes=("lognorm", 8.0, 1.0, 0.0, 1.5e7), dbytes=("lognorm", 5.5, 1.0, 0.4, 1.5e7),
        spkts=("int", 10, 60), dpkts=("int", 0, 10),
        sttl=("const", 254.0), dttl=("choice", {0.0: 0.4, 252.0: 0.6}), ct_state_ttl=("choice", {2.0: 0.4, 1.0: 0.6}),
        swin=("choice", {0.0: 0.4, 255.0: 0.6}), dwin=("choice", {0.0: 0.4, 255.0: 0.6}),
        tcprtt=("uniform", 0.0, 0.15), synack=("uniform", 0.0, 0.1), ackdat=("uniform", 0.0, 0.1),
        smean=("lognorm", 5.5, 0.5, 0.0, 1500.0), dmean=("lognorm", 4.0, 0.7, 0.4, 1500.0),
        sload=("lognorm", 12.0, 2.0, 0.0, 5e9), dload=("lognorm", 7.0, 2.0, 0.4, 5e9),
        sinpkt=("lognorm", 2.0, 1.5, 0.0, 6e4), dinpkt=("lognorm", 2.0, 1.5, 0.4, 6e4),
        ct_srv_src=("int", 1, 15), ct_dst_ltm=("int", 1, 10), ct_src_dport_ltm=("int", 1, 8),
        ct_dst_sport_ltm=("int", 1, 5), ct_dst_src_ltm=("int", 1, 10), ct_src_ltm=("int", 1, 10),
        ct_srv_dst=("int", 1, 15),
    ),
}
# test-only families with benign-looking volumes
UNSW_PROFILES["Backdoor"] = dict(UNSW_PROFILES["Exploits"], sbytes=("lognorm", 7.0, 1.2, 0.0, 1.5e7),
                                 dbytes=("lognorm", 8.2, 1.5, 0.1, 1.5e7),
                                 spkts=("lognorm", 2.5, 0.8, 0.0, 10000.0),
                                 dpkts=("lognorm", 2.7, 1.0, 0.05, 10000.0))
UNSW_PROFILES["Shellcode"] = dict(UNSW_PROFILES["Fuzzers"], sbytes=("lognorm", 7.3, 1.0, 0.0, 1.5e7),
                                  dbytes=("lognorm", 8.0, 1.2, 0.1, 1.5e7),
                                  spkts=("lognorm", 2.6, 0.8, 0.0, 10000.0),
                                  dpkts=("lognorm", 2.6, 0.9, 0.05, 10000.0),
                                  dur=("lognorm", -1.0, 1.5, 0.05, 60.0))
UNSW_PROFILES["Worms"] = dict(UNSW_PROFILES["Reconnaissance"], sbytes=("lognorm", 7.5, 1.0, 0.0, 1.5e7),
                              dbytes=("lognorm", 8.5, 1.5, 0.1, 1.5e7),
                              spkts=("lognorm", 2.7, 0.9, 0.0, 10000.0),
                              dpkts=("lognorm", 2.9, 1.0, 0.05, 10000.0))

UNSW_TRAIN_MIX = {"Normal": 0.32, "Generic": 0.23, "Exploits": 0.19, "Fuzzers": 0.1,
                  "DoS": 0.07, "Reconnaissance": 0.07, "Backdoor": 0.005, "Shellcode": 0.01, "Worms": 0.005}
UNSW_TEST_MIX = {"Normal": 0.45, "Generic": 0.2, "Exploits": 0.11, "Fuzzers": 0.07, "DoS": 0.04,
                 "Reconnaissance": 0.03, "Backdoor": 0.04, "Shellcode": 0.03, "Worms": 0.03}


def unsw_nb15_rows(n: int, test: bool, seed: int, camouflage: float = 0.15, benign_noise: float = 0.04):
    rng = np.random.default_rng(seed)
    mix = UNSW_TEST_MIX if test else UNSW_TRAIN_MIX
    attacks = ["Generic", "Exploits", "Fuzzers", "DoS", "Reconnaissance"]
    cats, cols = _sample_rows(UNSW_PROFILES, mix, "Normal", UNSW_LAYOUT, n, rng, camouflage,
                              benign_noise, attacks)
    spkts = cols["spkts"].astype(float)
    dpkts = cols["dpkts"].astype(float)
    dur = cols["dur"].astype(float)
    # long-tailed profiles: byte totals are packets times mean packet size
    derive = np.isin(np.array(cats), ["Normal", "Backdoor", "Shellcode", "Worms"])
    smean = cols["smean"].astype(float)
    dmean = cols["dmean"].astype(float)
    cols["sbytes"] = np.where(derive, np.round(spkts * smean), cols["sbytes"].astype(float))
    cols["dbytes"] = np.where(derive, np.round(dpkts * dmean), cols["dbytes"].astype(float))
    # packets per second over the connection, as in the partition files
    cols["rate"] = np.where(dur > 0, (spkts + dpkts - 1).clip(0) / np.where(dur > 0, dur, 1.0), 0.0)
    yield from _unsw_lines(cats, cols, n)


def _unsw_lines(cats, cols, n):
    for i in range(n):
        row = []
        for c in UNSW_COLUMNS:
            if c == "id":
                row.append(str(i + 1))
            elif c == "attack_cat":
                row.append(cats[i])
            elif c == "label":
                row.append("0" if cats[i] == "Normal" else "1")
            else:
                row.append(_fmt(cols[c][i]))
        yield row


def write_unsw_nb15(out_dir: str | Path, n_train: int = 30000, n_test: int = 8000, seed: int = 0,
                    **kw) -> tuple[Path, Path]:
    """Write ``UNSW_NB15_training-set.csv`` and ``UNSW_NB15_testing-set.csv`` (header, 45 columns)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = out_dir / "UNSW_NB15_training-set.csv", out_dir / "UNSW_NB15_testing-set.csv"
    for path, n, test, s in ((paths[0], n_train, False, seed), (paths[1], n_test, True, seed + 1)):
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(UNSW_COLUMNS)
            w.writerows(unsw_nb15_rows(n, test, s, **kw))
    return paths


def write_surrogate(dataset: str, out_dir: str | Path, **kw) -> tuple[Path, Path]:
    if dataset == "nsl_kdd":
        return write_nsl_kdd(out_dir, **kw)
    if dataset == "unsw_nb15":
        return write_unsw_nb15(out_dir, **kw)
    raise ValueError(f"no surrogate generator for {dataset!r}")
