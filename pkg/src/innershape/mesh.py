"""Structured triangulations of the unit square with optional periodic identification.

The parameter domain is [0,1]^2 subdivided into nx*ny rectangular cells, each
split into two triangles along the lower-left to upper-right diagonal.  A
topology selects which coordinate directions wrap around: none (a plane
sheet), the first (a cylinder), or both (a torus).  Wrapped grid points are
identified, so fields carry one value per unique node.

Triangles keep their un-wrapped parameter coordinates; on periodic meshes a
seam triangle must take its derivatives from coordinates that continue past
1.0, not from the wrapped representative.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import MeshFormatError, MeshResolutionError

MESH_MAGIC = "IMESH 1"
VELOCITY_MAGIC = "IVEC 1"

# int32 is the widest index type the sparse assembly is guaranteed to handle
MAX_NODES = np.iinfo(np.int32).max


class Topology(Enum):
    """Periodic identification pattern of the parameter square."""

    PLANE = "plane"
    CYLINDER = "cylinder"
    TORUS = "torus"

    @property
    def periodic_x(self) -> bool:
        return self in (Topology.CYLINDER, Topology.TORUS)

    @property
    def periodic_y(self) -> bool:
        return self is Topology.TORUS

    @classmethod
    def parse(cls, name: str) -> "Topology":
        try:
            return cls(name.strip().lower())
        except ValueError:
            valid = ", ".join(t.value for t in cls)
            raise ValueError(f"unknown topology {name!r} (expected one of: {valid})") from None


@dataclass
class DomainMesh:
    """Triangulated parameter domain with node identification.

    Attributes
    ----------
    topology : Topology
        Periodic identification pattern.
    nx, ny : int
        Number of cells per coordinate direction.
    nodes : ndarray, shape (n, 2)
        Parameter coordinates of the unique nodes (wrapped representatives).
    triangles : ndarray, shape (ntri, 3)
        Unique node indices per triangle, counterclockwise.
    dof_map : ndarray, shape ((nx+1)*(ny+1),)
        Full grid index (row-major, j*(nx+1)+i) to unique node index.
    tri_param : ndarray, shape (ntri, 3, 2)
        Un-wrapped parameter coordinates of each triangle's vertices.
    basis_grad : ndarray, shape (ntri, 3, 2)
        Constant gradients of the three linear nodal basis functions.
    area : ndarray, shape (ntri,)
        Parameter-space triangle areas.
    """

    topology: Topology
    nx: int
    ny: int
    nodes: np.ndarray = field(repr=False)
    triangles: np.ndarray = field(repr=False)
    dof_map: np.ndarray = field(repr=False)
    tri_param: np.ndarray = field(repr=False)
    basis_grad: np.ndarray = field(repr=False)
    area: np.ndarray = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    def grid_index(self, i: int, j: int) -> int:
        """Unique node index of grid point (i, j), wrapping periodic directions."""
        if self.topology.periodic_x:
            i = i % self.nx
        if self.topology.periodic_y:
            j = j % self.ny
        return int(self.dof_map[j * (self.nx + 1) + i])


def compatible(a: DomainMesh, b: DomainMesh) -> bool:
    """Whether two meshes index the same discrete space."""
    return a is b or (a.topology is b.topology and a.nx == b.nx and a.ny == b.ny)


def build_grid(topology: Topology, nx: int, ny: int) -> DomainMesh:
    """Build the structured triangulation for a topology and resolution.

    Parameters
    ----------
    topology : Topology
        Which directions to identify periodically.
    nx, ny : int
        Cells per direction; periodic directions need at least 3.

    Returns
    -------
    DomainMesh
    """
    if nx < 1 or ny < 1:
        raise MeshResolutionError(f"resolution must be at least 1x1, got {nx}x{ny}")
    if topology.periodic_x and nx < 3:
        raise MeshResolutionError(
            f"{topology.value} is periodic in x and needs nx >= 3, got nx={nx}"
        )
    if topology.periodic_y and ny < 3:
        raise MeshResolutionError(
            f"{topology.value} is periodic in y and needs ny >= 3, got ny={ny}"
        )
    if (nx + 1) * (ny + 1) > MAX_NODES:
        raise MeshResolutionError(f"node count for {nx}x{ny} exceeds the 32-bit index range")

    ncols = nx if topology.periodic_x else nx + 1
    nrows = ny if topology.periodic_y else ny + 1

    # grid point (i, j) -> unique node id of its wrapped representative
    ii, jj = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), indexing="xy")
    iw = ii % nx if topology.periodic_x else ii
    jw = jj % ny if topology.periodic_y else jj
    dof_map = (jw * ncols + iw).astype(np.int64).ravel()

    nodes = np.empty((nrows * ncols, 2))
    iu, ju = np.meshgrid(np.arange(ncols), np.arange(nrows), indexing="xy")
    nodes[:, 0] = iu.ravel() / nx
    nodes[:, 1] = ju.ravel() / ny

    # two triangles per cell, split along the lower-left to upper-right diagonal
    ci, cj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    ci = ci.ravel()
    cj = cj.ravel()

    def gid(i, j):
        return dof_map[j * (nx + 1) + i]

    lower = np.stack([gid(ci, cj), gid(ci + 1, cj), gid(ci + 1, cj + 1)], axis=1)
    upper = np.stack([gid(ci, cj), gid(ci + 1, cj + 1), gid(ci, cj + 1)], axis=1)
    triangles = np.empty((2 * nx * ny, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    corner = np.stack([ci, cj], axis=1).astype(float)
    p00 = corner / (nx, ny)
    p10 = (corner + (1, 0)) / (nx, ny)
    p11 = (corner + (1, 1)) / (nx, ny)
    p01 = (corner + (0, 1)) / (nx, ny)
    tri_param = np.empty((2 * nx * ny, 3, 2))
    tri_param[0::2] = np.stack([p00, p10, p11], axis=1)
    tri_param[1::2] = np.stack([p00, p11, p01], axis=1)

    basis_grad, area = _reference_gradients(tri_param)

    return DomainMesh(
        topology=topology,
        nx=nx,
        ny=ny,
        nodes=nodes,
        triangles=triangles,
        dof_map=dof_map,
        tri_param=tri_param,
        basis_grad=basis_grad,
        area=area,
    )


def _reference_gradients(tri_param: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of the linear nodal basis and areas, per triangle."""
    e1 = tri_param[:, 1] - tri_param[:, 0]
    e2 = tri_param[:, 2] - tri_param[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    if np.any(det <= 0):
        raise MeshResolutionError("degenerate or inverted parameter triangle")
    # rows of the inverse edge matrix are the gradients of the two
    # non-anchor basis functions
    inv_det = 1.0 / det
    g1 = np.stack([e2[:, 1], -e2[:, 0]], axis=1) * inv_det[:, None]
    g2 = np.stack([-e1[:, 1], e1[:, 0]], axis=1) * inv_det[:, None]
    basis_grad = np.stack([-(g1 + g2), g1, g2], axis=1)
    return basis_grad, 0.5 * det


# ---------------------------------------------------------------------------
# native file format
# ---------------------------------------------------------------------------


def _write_native(mesh: DomainMesh, values: np.ndarray, path, magic: str) -> None:
    values = np.asarray(values, dtype=float)
    if values.shape != (mesh.n_nodes, 3):
        raise ValueError(f"expected ({mesh.n_nodes}, 3) values, got {values.shape}")
    with open(path, "w") as f:
        f.write(f"{magic}\n")
        f.write(f"{mesh.topology.value} {mesh.nx} {mesh.ny}\n")
        f.write(f"{mesh.n_nodes} {mesh.n_triangles}\n")
        for x, y, z in values:
            f.write(f"v {float(x)!r} {float(y)!r} {float(z)!r}\n")
        for a, b, c in mesh.triangles:
            f.write(f"f {a} {b} {c}\n")


def _read_native(path, magic: str) -> tuple[DomainMesh, np.ndarray]:
    try:
        with open(path) as f:
            lines = f.read().splitlines()
    except OSError as exc:
        raise MeshFormatError(f"cannot read {path}: {exc}") from exc

    def need(idx: int) -> str:
        if idx >= len(lines):
            raise MeshFormatError("unexpected end of file", line=len(lines) + 1)
        return lines[idx]

    if need(0).strip() != magic:
        raise MeshFormatError(f"expected header {magic!r}", line=1)
    head = need(1).split()
    if len(head) != 3:
        raise MeshFormatError("expected '<topology> <nx> <ny>'", line=2)
    try:
        topology = Topology.parse(head[0])
        nx, ny = int(head[1]), int(head[2])
    except ValueError as exc:
        raise MeshFormatError(str(exc), line=2) from None
    counts = need(2).split()
    if len(counts) != 2:
        raise MeshFormatError("expected '<node_count> <tri_count>'", line=3)
    try:
        n_nodes, n_tris = int(counts[0]), int(counts[1])
    except ValueError:
        raise MeshFormatError("counts must be integers", line=3) from None

    mesh = build_grid(topology, nx, ny)
    if mesh.n_nodes != n_nodes or mesh.n_triangles != n_tris:
        raise MeshFormatError(
            f"header counts {n_nodes}/{n_tris} do not match "
            f"{topology.value} {nx}x{ny} ({mesh.n_nodes}/{mesh.n_triangles})",
            line=3,
        )

    values = np.empty((n_nodes, 3))
    for k in range(n_nodes):
        lineno = 4 + k
        parts = need(3 + k).split()
        if len(parts) != 4 or parts[0] != "v":
            raise MeshFormatError("expected 'v x y z'", line=lineno)
        try:
            values[k] = [float(p) for p in parts[1:]]
        except ValueError:
            raise MeshFormatError("bad coordinate", line=lineno) from None
    for k in range(n_tris):
        lineno = 4 + n_nodes + k
        parts = need(3 + n_nodes + k).split()
        if len(parts) != 4 or parts[0] != "f":
            raise MeshFormatError("expected 'f i j k'", line=lineno)
        try:
            tri = [int(p) for p in parts[1:]]
        except ValueError:
            raise MeshFormatError("bad node index", line=lineno) from None
        if not np.array_equal(mesh.triangles[k], tri):
            raise MeshFormatError(
                f"triangle {tri} does not match the {topology.value} {nx}x{ny} connectivity",
                line=lineno,
            )
    extra = 3 + n_nodes + n_tris
    if any(line.strip() for line in lines[extra:]):
        raise MeshFormatError("trailing content after triangle records", line=extra + 1)
    return mesh, values


def save_mesh(mesh: DomainMesh, coords: np.ndarray, path) -> None:
    """Write a mesh and its immersed node coordinates in the native format."""
    _write_native(mesh, coords, path, MESH_MAGIC)


def load_mesh(path) -> tuple[DomainMesh, np.ndarray]:
    """Read a native mesh file; returns the mesh and its (n, 3) coordinates."""
    return _read_native(path, MESH_MAGIC)


def save_velocity(mesh: DomainMesh, values: np.ndarray, path) -> None:
    """Write a nodal vector field in the native format (velocity header)."""
    _write_native(mesh, values, path, VELOCITY_MAGIC)


def load_velocity(path) -> tuple[DomainMesh, np.ndarray]:
    """Read a native velocity file; returns the mesh and the (n, 3) field."""
    return _read_native(path, VELOCITY_MAGIC)


def export_obj(mesh: DomainMesh, coords: np.ndarray, path) -> None:
    """Write a Wavefront OBJ file (1-based indices).

    Node identification is not representable in OBJ, so seam triangles on
    periodic meshes reference the wrapped nodes; the export is lossy there.
    """
    coords = np.asarray(coords, dtype=float)
    if coords.shape != (mesh.n_nodes, 3):
        raise ValueError(f"expected ({mesh.n_nodes}, 3) coordinates, got {coords.shape}")
    with open(path, "w") as f:
        for x, y, z in coords:
            f.write(f"v {float(x)!r} {float(y)!r} {float(z)!r}\n")
        for a, b, c in mesh.triangles:
            f.write(f"f {a + 1} {b + 1} {c + 1}\n")
