"""Reading and writing spectra, channels and result tables.

* Spectrum files: one energy per line, ``#`` starts a comment.
* Channel files: JSON with ``schema_version``; the unitary is stored as
  permutation images or as dense ``re``/``im`` rows.
* Tables: CSV with fixed headers; floats are written with ``repr`` so that
  reruns are byte-identical and values round-trip exactly.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .channels import DilatedChannel, JointUnitary
from .exceptions import DomainError
from .qcore import ClassicalState, DensityOperator, Spectrum

SCHEMA_VERSION = 1


def load_spectrum(path):
    values = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        try:
            values.append(float(text))
        except ValueError as exc:
            raise DomainError(f"{path}:{lineno}: not a number: {text!r}") from exc
    return Spectrum(values)


def save_spectrum(spectrum, path, comment=None):
    lines = [f"# {c}" for c in (comment or "").splitlines()]
    lines += [repr(float(e)) for e in spectrum.energies]
    Path(path).write_text("\n".join(lines) + "\n")


def _state_to_json(state):
    if isinstance(state, ClassicalState):
        return {"kind": "diagonal", "probs": state.probs.tolist()}
    m = state.matrix
    return {"kind": "dense", "re": m.real.tolist(), "im": m.imag.tolist()}


def _state_from_json(obj):
    if obj["kind"] == "diagonal":
        return ClassicalState.from_weights(obj["probs"])
    return DensityOperator.from_matrix(np.array(obj["re"]) + 1j * np.array(obj["im"]))


def channel_to_dict(ch):
    u = ch.unitary
    if u.is_permutation:
        unitary = {"kind": "permutation", "images": u.permutation.images.tolist()}
    else:
        unitary = {"kind": "dense", "re": u.matrix.real.tolist(), "im": u.matrix.imag.tolist()}
    out = {
        "schema_version": SCHEMA_VERSION,
        "energies": ch.spectrum.energies.tolist(),
        "dC": ch.dC,
        "beta": ch.beta,
        "unitary": unitary,
        "sigma_C": _state_to_json(ch.sigma_C),
    }
    gibbs = ch.gibbs()
    if not (isinstance(ch.reference, ClassicalState) and np.array_equal(ch.reference.probs, gibbs.probs)):
        out["reference"] = _state_to_json(ch.reference)
    return out


def channel_from_dict(obj):
    version = obj.get("schema_version")
    if version != SCHEMA_VERSION:
        raise DomainError(f"unsupported channel schema_version {version!r}")
    u = obj["unitary"]
    if u["kind"] == "permutation":
        unitary = JointUnitary.from_permutation(u["images"])
    else:
        unitary = JointUnitary.dense(np.array(u["re"]) + 1j * np.array(u["im"]))
    reference = _state_from_json(obj["reference"]) if "reference" in obj else None
    return DilatedChannel(Spectrum(obj["energies"]), obj["dC"], unitary,
                          _state_from_json(obj["sigma_C"]), obj["beta"], reference=reference)


def save_channel(ch, path):
    Path(path).write_text(json.dumps(channel_to_dict(ch), indent=2) + "\n")


def load_channel(path):
    return channel_from_dict(json.loads(Path(path).read_text()))


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                             for v in row])


def read_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [[float(v) for v in row] for row in reader]


def write_work_distribution(dist, path):
    write_csv(path, ["w", "p"], dist.atoms())


def write_joint_outcomes(joint, path):
    write_csv(path, ["E_i", "E_f", "p"], joint.by_energy())


def write_records(records, path):
    n = len(records[0].works) if records else 0
    header = [f"w_{k + 1}" for k in range(n)] + ["p"]
    write_csv(path, header, [list(r.works) + [r.prob] for r in records])
