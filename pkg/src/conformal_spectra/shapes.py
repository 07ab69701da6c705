"""Reference meshes with known spectra."""

import numpy as np

from .mesh import TriMesh, refine


def equilateral_triangle(side=1.0):
    h = np.sqrt(3.0) / 2.0 * side
    return TriMesh([[0.0, 0.0, 0.0], [side, 0.0, 0.0], [0.5 * side, h, 0.0]], [[0, 1, 2]])


def octahedron():
    v = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]]
    t = [
        [0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4],
        [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5],
    ]
    return TriMesh(v, t)


def icosahedron():
    """Regular icosahedron inscribed in the unit sphere, outward oriented."""
    p = (1.0 + np.sqrt(5.0)) / 2.0
    v = np.array(
        [
            [-1, p, 0], [1, p, 0], [-1, -p, 0], [1, -p, 0],
            [0, -1, p], [0, 1, p], [0, -1, -p], [0, 1, -p],
            [p, 0, -1], [p, 0, 1], [-p, 0, -1], [-p, 0, 1],
        ],
        dtype=float,
    )
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    t = [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ]
    return TriMesh(v, t)


def icosphere(levels=3):
    """Icosahedron refined ``levels`` times with vertices on the unit sphere."""
    return refine(icosahedron(), levels, sphere_project=True)


def flat_torus(n=24):
    """Flat unit-square torus on an ``n`` x ``n`` grid.

    Vertices sit on the Clifford embedding in R^4, so every triangle is an
    exact scaled copy of its flat counterpart: renormalized eigenvalues match
    the flat square torus discretization exactly.
    """
    if n < 3:
        raise ValueError("need at least a 3 x 3 grid")
    s = np.arange(n) / n
    x, y = np.meshgrid(s, s, indexing="ij")
    x, y = x.ravel(), y.ravel()
    a, b = 2 * np.pi * x, 2 * np.pi * y
    v = np.column_stack([np.cos(a), np.sin(a), np.cos(b), np.sin(b)]) / (2 * np.pi)
    idx = np.arange(n * n).reshape(n, n)
    i0, i1 = idx, np.roll(idx, -1, axis=0)
    i01, i11 = np.roll(idx, -1, axis=1), np.roll(i1, -1, axis=1)
    t = np.concatenate(
        [
            np.column_stack([i0.ravel(), i1.ravel(), i11.ravel()]),
            np.column_stack([i0.ravel(), i11.ravel(), i01.ravel()]),
        ]
    )
    return TriMesh(v, t)


def unit_disk(n=31, radius=1.0):
    """Disk mesh with ``n`` concentric rings, ``1 + 3n(n+1)`` vertices.

    Built from the hexagonal lattice and mapped ring by ring onto circles, so
    ring ``k`` has ``6k`` equally spaced vertices at radius ``k / n``.
    """
    pts = [(q, r) for q in range(-n, n + 1) for r in range(-n, n + 1) if max(abs(q), abs(r), abs(q + r)) <= n]
    index = {p: i for i, p in enumerate(pts)}
    tris = []
    for (q, r), i in index.items():
        a, b, c = index.get((q + 1, r)), index.get((q, r + 1)), index.get((q + 1, r - 1))
        if a is not None and b is not None:
            tris.append([i, a, b])
        if c is not None and a is not None:
            tris.append([i, c, a])
    verts = np.zeros((len(pts), 2))
    for (q, r), i in index.items():
        k = max(abs(q), abs(r), abs(q + r))
        if k == 0:
            continue
        x = q + 0.5 * r
        y = np.sqrt(3.0) / 2.0 * r
        ang = np.arctan2(y, x) % (2 * np.pi)
        sector = int(np.floor(ang / (np.pi / 3) + 1e-9)) % 6
        c0 = np.array([np.cos(sector * np.pi / 3), np.sin(sector * np.pi / 3)]) * k
        c1 = np.array([np.cos((sector + 1) * np.pi / 3), np.sin((sector + 1) * np.pi / 3)]) * k
        t = np.dot(np.array([x, y]) - c0, c1 - c0) / np.dot(c1 - c0, c1 - c0)
        theta = (sector + t) * np.pi / 3
        verts[i] = radius * k / n * np.array([np.cos(theta), np.sin(theta)])
    return TriMesh(verts, np.array(tris))


def square_with_hole(n=6, hole=2):
    """Planar square grid with a centred square hole (an annulus, chi = 0)."""
    lo = (n - hole) // 2
    hi = lo + hole
    idx = {}
    verts = []
    for i in range(n + 1):
        for j in range(n + 1):
            idx[i, j] = len(verts)
            verts.append([i / n, j / n])
    tris = []
    for i in range(n):
        for j in range(n):
            if lo <= i < hi and lo <= j < hi:
                continue
            a, b, c, d = idx[i, j], idx[i + 1, j], idx[i + 1, j + 1], idx[i, j + 1]
            tris += [[a, b, c], [a, c, d]]
    used = np.unique(np.array(tris))
    remap = -np.ones(len(verts), dtype=int)
    remap[used] = np.arange(len(used))
    return TriMesh(np.array(verts)[used], remap[np.array(tris)])


def bump_factor(mesh, amplitude=0.3, bumps=4, width=8.0, seed=0):
    """Smooth positive factor ``1 + amplitude * b`` with ``max b = 1``.

    ``b`` is a sum of Gaussian bumps centred at random vertices, with
    distances measured in units of the mesh bounding-box diagonal.
    """
    rng = np.random.default_rng(seed)
    x = mesh.vertices / mesh.scale
    centers = rng.choice(mesh.n_vertices, size=min(bumps, mesh.n_vertices), replace=False)
    b = np.zeros(mesh.n_vertices)
    for c in centers:
        b += np.exp(-width * np.sum((x - x[c]) ** 2, axis=1) * 4.0)
    return 1.0 + amplitude * b / b.max()
