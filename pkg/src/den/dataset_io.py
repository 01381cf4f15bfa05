"""Binary container format plus mesh, dataset, basis and checkpoint files built on it.

Layout (all little-endian)::

    b"DEN1" | u32 version | u32 count | entries...
    entry := u32 name_len | utf-8 name | u8 dtype | u8 rank | i64[rank] shape | payload

dtype codes: 1 float64, 2 complex128 (interleaved re/im), 3 int64.
"""

from __future__ import annotations

import logging
import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import CorruptContainer, NumericalError
from .fem import assemble_boundary_mass, assemble_stiffness, build_system
from .linalg import orthonormal_columns
from .mesh import Mesh
from .random_field import FieldSpec, sample_parameter_field
from .reference_solver import solve_steklov

log = logging.getLogger(__name__)

MAGIC = b"DEN1"
VERSION = 1
_CODES = {1: np.dtype("<f8"), 2: np.dtype("<c16"), 3: np.dtype("<i8")}
_KIND_TO_CODE = {"f": 1, "c": 2, "i": 3, "u": 3, "b": 3}


def _encode(arr) -> tuple[int, np.ndarray]:
    a = np.asarray(arr)
    code = _KIND_TO_CODE.get(a.dtype.kind)
    if code is None:
        raise TypeError(f"unsupported dtype {a.dtype}")
    # np.ascontiguousarray would promote 0-d scalars to shape (1,)
    return code, np.array(a, dtype=_CODES[code], order="C", copy=True)


def write_container(path, entries: dict) -> None:
    """Write named arrays; insertion order of ``entries`` is preserved."""
    parts = [MAGIC, struct.pack("<II", VERSION, len(entries))]
    for name, arr in entries.items():
        code, a = _encode(arr)
        raw = name.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<BB", code, a.ndim))
        parts.append(struct.pack(f"<{a.ndim}q", *a.shape))
        parts.append(a.tobytes(order="C"))
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(b"".join(parts))
    os.replace(tmp, path)


def read_container(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        data = fh.read()
    return parse_container(data)


def parse_container(data: bytes) -> dict[str, np.ndarray]:
    if len(data) < 12 or data[:4] != MAGIC:
        raise CorruptContainer("bad magic")
    version, count = struct.unpack_from("<II", data, 4)
    pos = 12
    out = {}

    def take(n):
        nonlocal pos
        if pos + n > len(data):
            raise CorruptContainer("truncated container")
        chunk = data[pos:pos + n]
        pos += n
        return chunk

    for _ in range(count):
        (nlen,) = struct.unpack("<I", take(4))
        try:
            name = take(nlen).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorruptContainer("entry name is not utf-8") from exc
        code, rank = struct.unpack("<BB", take(2))
        if code not in _CODES:
            raise CorruptContainer(f"unknown dtype code {code} for {name!r}")
        shape = struct.unpack(f"<{rank}q", take(8 * rank))
        if any(s < 0 for s in shape):
            raise CorruptContainer(f"negative dimension in {name!r}")
        dt = _CODES[code]
        nbytes = int(np.prod(shape, dtype=np.int64)) * dt.itemsize
        arr = np.frombuffer(take(nbytes), dtype=dt).reshape(shape).copy()
        if name in out:
            raise CorruptContainer(f"duplicate entry {name!r}")
        out[name] = arr
    return out


# ------------------------------------------------------------ text blobs

def encode_text(text: str) -> np.ndarray:
    """UTF-8 bytes widened to int64 (the format has no byte dtype)."""
    return np.frombuffer(text.encode("utf-8"), dtype=np.uint8).astype(np.int64)


def decode_text(arr: np.ndarray) -> str:
    return np.asarray(arr, dtype=np.int64).astype(np.uint8).tobytes().decode("utf-8")


def encode_kv(d: dict) -> np.ndarray:
    return encode_text("".join(f"{k}={v}\n" for k, v in d.items()))


def decode_kv(arr: np.ndarray) -> dict[str, str]:
    out = {}
    for line in decode_text(arr).splitlines():
        if line:
            k, _, v = line.partition("=")
            out[k] = v
    return out


# ------------------------------------------------------------ sparse matrices and spectra

def sparse_entries(name: str, mat) -> dict:
    """CSR as parallel ``rowptr``/``colidx``/``values`` arrays plus ``shape``."""
    import scipy.sparse as sp
    m = sp.csr_matrix(mat)
    m.sort_indices()
    return {f"{name}.rowptr": m.indptr.astype(np.int64), f"{name}.colidx": m.indices.astype(np.int64),
            f"{name}.values": m.data.astype(np.complex128), f"{name}.shape": np.array(m.shape, dtype=np.int64)}


def sparse_from_entries(entries: dict, name: str, real: bool = False):
    import scipy.sparse as sp
    try:
        vals = entries[f"{name}.values"]
        shape = tuple(int(x) for x in entries[f"{name}.shape"])
        m = sp.csr_matrix((vals.real if real else vals, entries[f"{name}.colidx"], entries[f"{name}.rowptr"]),
                          shape=shape)
    except KeyError as exc:
        raise CorruptContainer(f"missing sparse entry {exc}") from exc
    return m


def spectrum_entries(result, prefix: str = "") -> dict:
    return {f"{prefix}eigvals": result.eigenvalues, f"{prefix}eigvecs": result.eigenvectors,
            f"{prefix}residuals": result.residuals}


def spectrum_from_entries(entries: dict, prefix: str = ""):
    from .reference_solver import SpectrumResult
    try:
        return SpectrumResult(entries[f"{prefix}eigvals"], entries[f"{prefix}eigvecs"],
                              entries[f"{prefix}residuals"])
    except KeyError as exc:
        raise CorruptContainer(f"missing spectrum entry {exc}") from exc


# ------------------------------------------------------------ meshes

def mesh_entries(mesh: Mesh, prefix: str = "mesh.") -> dict:
    return {f"{prefix}nodes": mesh.nodes, f"{prefix}triangles": mesh.triangles,
            f"{prefix}boundary_edges": mesh.boundary_edges}


def mesh_from_entries(entries: dict, prefix: str = "mesh.") -> Mesh:
    try:
        return Mesh(entries[f"{prefix}nodes"], entries[f"{prefix}triangles"],
                    entries[f"{prefix}boundary_edges"])
    except KeyError as exc:
        raise CorruptContainer(f"missing mesh entry {exc}") from exc


def write_mesh(path, mesh: Mesh) -> None:
    write_container(path, mesh_entries(mesh))


def read_mesh(path) -> Mesh:
    return mesh_from_entries(read_container(path))


# ------------------------------------------------------------ datasets

def _spec_dict(spec: FieldSpec) -> dict:
    return {"mode_min": spec.mode_min, "mode_max": spec.mode_max, "beta": repr(spec.beta),
            "real_lo": repr(spec.real_range[0]), "real_hi": repr(spec.real_range[1]),
            "imag_lo": repr(spec.imag_range[0]), "imag_hi": repr(spec.imag_range[1]),
            "seed": spec.seed, "weight_exponent_sign": spec.weight_exponent_sign}


def _spec_from_dict(d: dict) -> FieldSpec:
    return FieldSpec(mode_min=int(d["mode_min"]), mode_max=int(d["mode_max"]), beta=float(d["beta"]),
                     real_range=(float(d["real_lo"]), float(d["real_hi"])),
                     imag_range=(float(d["imag_lo"]), float(d["imag_hi"])), seed=int(d["seed"]),
                     weight_exponent_sign=int(d["weight_exponent_sign"]))


@dataclass(eq=False)
class Dataset:
    mesh: Mesh
    field_spec: FieldSpec
    k_squared: float
    n: np.ndarray          # (S, N) complex nodal fields
    eigvals: np.ndarray    # (S, K)
    eigvecs: np.ndarray    # (S, N, K)
    Q_V: np.ndarray        # (S, N, k_V)
    sample_ids: np.ndarray
    train_count: int
    failed_ids: np.ndarray

    @property
    def size(self) -> int:
        return len(self.sample_ids)

    @property
    def K(self) -> int:
        return self.eigvals.shape[1]

    @property
    def k_V(self) -> int:
        return self.Q_V.shape[2]

    def split(self, part: str) -> slice:
        if part == "train":
            return slice(0, self.train_count)
        if part == "test":
            return slice(self.train_count, self.size)
        if part == "all":
            return slice(0, self.size)
        raise ValueError(f"unknown split {part!r}")

    def inputs(self, part: str = "all") -> np.ndarray:
        from .den_model import input_channels
        return input_channels(self.n[self.split(part)], self.mesh.nodes)

    def system(self, i: int):
        return build_system(self.mesh, self.n[i], self.k_squared)

    def to_entries(self) -> dict:
        e = mesh_entries(self.mesh)
        e["field_spec"] = encode_kv(_spec_dict(self.field_spec))
        e["k_squared"] = np.array(self.k_squared)
        e["train_count"] = np.array(self.train_count)
        e["sample_id"] = self.sample_ids
        e["failed_ids"] = self.failed_ids
        e["n"] = self.n
        e["eigvals"] = self.eigvals
        e["eigvecs"] = self.eigvecs
        e["Q_V"] = self.Q_V
        return e

    @classmethod
    def from_entries(cls, e: dict) -> "Dataset":
        try:
            return cls(mesh=mesh_from_entries(e), field_spec=_spec_from_dict(decode_kv(e["field_spec"])),
                       k_squared=float(e["k_squared"]), n=e["n"], eigvals=e["eigvals"],
                       eigvecs=e["eigvecs"], Q_V=e["Q_V"], sample_ids=e["sample_id"],
                       train_count=int(e["train_count"]), failed_ids=e["failed_ids"])
        except KeyError as exc:
            raise CorruptContainer(f"missing dataset entry {exc}") from exc


def write_dataset(path, ds: Dataset) -> None:
    write_container(path, ds.to_entries())


def read_dataset(path) -> Dataset:
    return Dataset.from_entries(read_container(path))


def target_basis(eigvecs: np.ndarray, k_V: int) -> np.ndarray:
    """Orthonormal target from the first ``k_V`` eigenvectors (QR, positive real R diagonal)."""
    return orthonormal_columns(eigvecs[..., :k_V])


def build_dataset(mesh: Mesh, field_spec: FieldSpec, sample_count: int, K: int, k_squared: float,
                  train_frac: float = 0.8, k_V: int | None = None) -> Dataset:
    """Sample fields, solve the pencils and assemble targets.

    Samples whose solve fails are skipped and logged; the train split is the
    first ``floor(train_frac * sample_count)`` sample ids that succeeded.
    """
    if not 0.0 <= train_frac <= 1.0:
        raise ValueError("train_frac must lie in [0, 1]")
    k_V = K if k_V is None else k_V
    if not 1 <= k_V <= K:
        raise ValueError("k_V must lie in [1, K]")
    S_mat = assemble_stiffness(mesh)
    Mb = assemble_boundary_mass(mesh)
    n_train = int(np.floor(train_frac * sample_count))
    ns, vals, vecs, ids, failed = [], [], [], [], []
    for sid in range(sample_count):
        field = sample_parameter_field(field_spec, mesh, sid)
        try:
            res = solve_steklov(build_system(mesh, field, k_squared, S_mat, Mb), K)
        except NumericalError as exc:
            log.warning("sample %d skipped: %s", sid, exc)
            failed.append(sid)
            continue
        ns.append(field.values)
        vals.append(res.eigenvalues)
        vecs.append(res.eigenvectors)
        ids.append(sid)
    ids = np.array(ids, dtype=np.int64)
    eigvecs = np.array(vecs).reshape(len(ids), mesh.num_nodes, K)
    return Dataset(mesh=mesh, field_spec=field_spec, k_squared=float(k_squared),
                   n=np.array(ns).reshape(len(ids), mesh.num_nodes),
                   eigvals=np.array(vals).reshape(len(ids), K), eigvecs=eigvecs,
                   Q_V=target_basis(eigvecs, k_V), sample_ids=ids,
                   train_count=int(np.sum(ids < n_train)), failed_ids=np.array(failed, dtype=np.int64))


# ------------------------------------------------------------ bases and checkpoints

def basis_entries(basis) -> dict:
    e = {"basis.Psi": basis.Psi, "basis.kind": encode_text(basis.kind)}
    if basis.singular_values is not None:
        e["basis.sigma"] = basis.singular_values
    if basis.eigenvalues is not None:
        e["basis.eigenvalues"] = basis.eigenvalues
    return e


def basis_from_entries(e: dict):
    from .pod_basis import SpectralBasis
    try:
        return SpectralBasis(Psi=e["basis.Psi"], kind=decode_text(e["basis.kind"]),
                             singular_values=e.get("basis.sigma"), eigenvalues=e.get("basis.eigenvalues"))
    except KeyError as exc:
        raise CorruptContainer(f"missing basis entry {exc}") from exc


def write_basis(path, basis) -> None:
    write_container(path, basis_entries(basis))


def read_basis(path):
    return basis_from_entries(read_container(path))


def write_checkpoint(path, model, params: dict | None = None) -> None:
    e = {"config": encode_kv(model.config.to_dict()),
         "stats.mean": model.stats.mean, "stats.std": model.stats.std}
    e.update(basis_entries(model.basis))
    for k, v in (model.numpy_params() if params is None else params).items():
        e[k] = v
    write_container(path, e)


def read_checkpoint(path):
    from .den_model import DenConfig, DenModel, InputStats
    e = read_container(path)
    try:
        config = DenConfig.from_dict(decode_kv(e["config"]))
        stats = InputStats(e["stats.mean"], e["stats.std"])
    except KeyError as exc:
        raise CorruptContainer(f"missing checkpoint entry {exc}") from exc
    basis = basis_from_entries(e)
    params = {k: v for k, v in e.items() if k.startswith(("lift.", "layer", "proj."))}
    return DenModel(config, basis, params=params, stats=stats)
