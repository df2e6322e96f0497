"""Run-artifact CSV writers and the SVG plots derived from them.

Every plot function takes CSV text (not live objects), so re-plotting from
the emitted files reproduces the figures byte for byte. The SVG output is
made deterministic by pinning the hash salt and dropping the date stamp.
"""

from __future__ import annotations

import io

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .errors import DomainError  # noqa: E402

plt.rcParams["svg.hashsalt"] = "interceptor"

_FIGSIZE = (6.0, 6.0)
_WIDE = (7.0, 4.2)


# ---------------------------------------------------------------------------
# CSV writers


def geometry_csv(world) -> str:
    """Map bounds and obstacle polygons at the planning instant."""
    lines = ["# map", "width,height",
             f"{world.width:.9g},{world.height:.9g}",
             "# obstacles", "obstacle,kind,vel_x,vel_y,x,y"]
    for i, ob in enumerate(world.obstacles):
        vx, vy = ob.velocity
        for x, y in ob.vertices_at_t0:
            lines.append(f"{i},{ob.kind},{vx:.9g},{vy:.9g},"
                         f"{x:.9g},{y:.9g}")
    return "\n".join(lines) + "\n"


def paths_csv(coarse, smoothed_points) -> str:
    """Coarse waypoints (with heading) and the smoothed polyline."""
    lines = ["# coarse", "x,y,theta"]
    for x, y, theta in coarse:
        lines.append(f"{x:.9g},{y:.9g},{theta:.9g}")
    lines.append("# smoothed")
    lines.append("x,y")
    for x, y in smoothed_points:
        lines.append(f"{x:.9g},{y:.9g}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# CSV parsers


def _split_sections(text: str) -> dict:
    """Sections start with '# name'; each holds a header line plus rows."""
    sections: dict = {}
    name = None
    for line in text.splitlines():
        if not line.strip():
            continue
        if line.startswith("# "):
            name = line[2:].strip()
            sections[name] = []
        elif name is not None:
            sections[name].append(line)
    return sections


def _rows(section: list, skip_header: bool = True) -> list:
    return section[1:] if skip_header else section


def parse_geometry_csv(text: str) -> tuple:
    sections = _split_sections(text)
    if "map" not in sections or "obstacles" not in sections:
        raise DomainError("geometry csv needs map and obstacles sections")
    width, height = (float(v) for v in _rows(sections["map"])[0].split(","))
    obstacles: dict = {}
    for line in _rows(sections["obstacles"]):
        idx, kind, vx, vy, x, y = line.split(",")
        entry = obstacles.setdefault(int(idx),
                                     {"kind": kind,
                                      "velocity": (float(vx), float(vy)),
                                      "vertices": []})
        entry["vertices"].append((float(x), float(y)))
    return (width, height), [obstacles[k] for k in sorted(obstacles)]


def parse_paths_csv(text: str) -> tuple:
    sections = _split_sections(text)
    coarse = np.array([[float(v) for v in line.split(",")]
                       for line in _rows(sections["coarse"])])
    smoothed = np.array([[float(v) for v in line.split(",")]
                         for line in _rows(sections["smoothed"])])
    return coarse.reshape(-1, 3), smoothed.reshape(-1, 2)


def parse_st_csv(text: str) -> tuple:
    sections = _split_sections(text)
    obstacles = []
    for line in _rows(sections["st_obstacles"]):
        vals = line.split(",")
        obstacles.append(np.array([float(v) for v in vals[1:]])
                         .reshape(4, 2))
    profile = np.array([[float(v) for v in line.split(",")]
                        for line in _rows(sections["profile"])])
    corridors = np.array([[float(v) for v in line.split(",")]
                          for line in _rows(sections["corridors"])])
    return obstacles, profile.reshape(-1, 2), corridors.reshape(-1, 7)


def parse_log_csv(text: str) -> np.ndarray:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    return np.array([[float(v) for v in line.split(",")]
                     for line in lines[1:]]).reshape(-1, 8)


def parse_profile_csv(text: str) -> np.ndarray:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    return np.array([[float(v) for v in line.split(",")]
                     for line in lines[1:]]).reshape(-1, 4)


# ---------------------------------------------------------------------------
# figures


def _render(fig) -> bytes:
    buf = io.BytesIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()


def _draw_world(ax, geometry_text: str) -> None:
    (width, height), obstacles = parse_geometry_csv(geometry_text)
    ax.set_xlim(0.0, width)
    ax.set_ylim(0.0, height)
    ax.set_aspect("equal")
    for ob in obstacles:
        xs = [p[0] for p in ob["vertices"]]
        ys = [p[1] for p in ob["vertices"]]
        color = "0.55" if ob["kind"] == "static" else "tab:orange"
        ax.fill(xs, ys, color=color, alpha=0.7, lw=0)
        vx, vy = ob["velocity"]
        if vx or vy:
            cx, cy = float(np.mean(xs)), float(np.mean(ys))
            ax.annotate("", xy=(cx + vx, cy + vy), xytext=(cx, cy),
                        arrowprops={"arrowstyle": "->",
                                    "color": "tab:red"})


def plot_plan(paths_text: str, geometry_text: str) -> bytes:
    """Coarse and smoothed paths over the obstacle map."""
    coarse, smoothed = parse_paths_csv(paths_text)
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    _draw_world(ax, geometry_text)
    ax.plot(coarse[:, 0], coarse[:, 1], "--", color="tab:blue", lw=1.2,
            label="coarse")
    ax.plot(smoothed[:, 0], smoothed[:, 1], "-", color="tab:green", lw=1.8,
            label="smoothed")
    ax.plot(coarse[0, 0], coarse[0, 1], "o", color="tab:blue", ms=6)
    ax.plot(coarse[-1, 0], coarse[-1, 1], "*", color="tab:red", ms=10)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.legend(loc="best")
    ax.set_title("path search and smoothing")
    return _render(fig)


def plot_trajectory(log_text: str, geometry_text: str) -> bytes:
    """Executed robot and target tracks over the obstacle map."""
    rows = parse_log_csv(log_text)
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    _draw_world(ax, geometry_text)
    ax.plot(rows[:, 1], rows[:, 2], "-", color="tab:green", lw=1.8,
            label="robot")
    ax.plot(rows[:, 5], rows[:, 6], "--", color="tab:red", lw=1.4,
            label="target")
    ax.plot(rows[0, 1], rows[0, 2], "o", color="tab:green", ms=6)
    ax.plot(rows[-1, 5], rows[-1, 6], "*", color="tab:red", ms=10)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.legend(loc="best")
    ax.set_title("closed-loop interception")
    return _render(fig)


def plot_st(st_text: str) -> bytes:
    """ST-plane view: obstacle parallelograms, DP reference, corridors."""
    obstacles, profile, corridors = parse_st_csv(st_text)
    fig, ax = plt.subplots(figsize=_WIDE)
    for verts in obstacles:
        ax.fill(verts[:, 0], verts[:, 1], color="0.55", alpha=0.7, lw=0)
    ax.plot(profile[:, 0], profile[:, 1], "-", color="tab:blue", lw=1.6,
            label="reference")
    first = True
    for row in corridors:
        _, t0, t1, lo0, lo1, hi0, hi1 = row
        ts = np.array([t0, t1])
        local = ts - t0
        ax.plot(ts, lo0 + lo1 * local, "-", color="tab:green", lw=1.0,
                label="corridor" if first else None)
        ax.plot(ts, hi0 + hi1 * local, "-", color="tab:green", lw=1.0)
        first = False
    ax.set_xlabel("t [s]")
    ax.set_ylabel("s [m]")
    ax.legend(loc="best")
    ax.set_title("speed planning in the ST plane")
    return _render(fig)


def plot_speed(profile_text: str) -> bytes:
    """Station, speed, and acceleration curves of the planned profile."""
    rows = parse_profile_csv(profile_text)
    fig, axes = plt.subplots(3, 1, figsize=(7.0, 7.5), sharex=True)
    labels = ("s [m]", "ds/dt [m/s]", "d2s/dt2 [m/s2]")
    colors = ("tab:blue", "tab:green", "tab:red")
    for ax, col, label, color in zip(axes, (1, 2, 3), labels, colors):
        ax.plot(rows[:, 0], rows[:, col], "-", color=color, lw=1.6)
        ax.set_ylabel(label)
        ax.grid(True, alpha=0.3)
    axes[-1].set_xlabel("t [s]")
    axes[0].set_title("optimized speed profile")
    fig.align_ylabels(axes)
    return _render(fig)
