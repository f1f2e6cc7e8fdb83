#!/usr/bin/env python3
"""Writes the bundled example models into models/."""

import json
import math
import os

OUT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "models")


def uniform_row(n, idx):
    row = [0.0] * n
    for i in idx:
        row[i] = 1.0 / len(idx)
    return row


def point_row(n, i):
    row = [0.0] * n
    row[i] = 1.0
    return row


def dump(name, doc):
    with open(os.path.join(OUT, name + ".json"), "w") as f:
        json.dump(doc, f, indent=1)
        f.write("\n")


def ctmdp_toy():
    rates = [[1.0, 1.0], [2.0, 2.0]]
    q = [[0.3, 0.7], [0.6, 0.4]]
    return {
        "schema": "pdmp-model/1",
        "name": "ctmdp_toy",
        "grid": {"points": [0.0, 1.0], "boundary_points": []},
        "actions": {"values": [1.0, 2.0]},
        "flow": {"kind": "trivial"},
        "rates": {"lambda": rates, "lambda_floor": [1.0, 2.0]},
        "kernel": {"Q": [[q[0], q[0]], [q[1], q[1]]]},
        "costs": {"running": [[3.0, 1.0], [4.0, 2.0]], "boundary": []},
        "lyapunov": {"g": [1.0, 1.0], "rbar": []},
        "constants": {"b": 0.5, "c": 0.5, "delta": 1.0, "M": 4.0, "K_lambda": 2.01, "k_g": 0.5, "K_g": 0.5},
    }


def ctmdp_3state():
    rates = [[0.5, 1.5, 3.0]] * 3
    base = [0.0, 2.0, 5.0]
    extra = [0.0, 1.0, 3.0]
    costs = [[base[x] + extra[a] for a in range(3)] for x in range(3)]
    q = []
    for x in range(3):
        up = min(x + 1, 2)
        rows = []
        a0 = [0.0] * 3
        a0[up] += 0.6
        a0[x] += 0.25
        a0[0] += 0.15
        rows.append(a0)
        a1 = [0.0] * 3
        a1[0] += 0.5
        a1[x] += 0.2
        a1[up] += 0.3
        rows.append(a1)
        a2 = [0.0] * 3
        a2[0] += 0.8
        a2[up] += 0.2
        rows.append(a2)
        q.append(rows)
    return {
        "schema": "pdmp-model/1",
        "name": "ctmdp_3state",
        "grid": {"points": [0.0, 1.0, 2.0], "boundary_points": []},
        "actions": {"values": [0.0, 1.0, 2.0]},
        "flow": {"kind": "trivial"},
        "rates": {"lambda": rates, "lambda_floor": [0.5, 0.5, 0.5]},
        "kernel": {"Q": q},
        "costs": {"running": costs, "boundary": []},
        "lyapunov": {"g": [1.0, 1.0, 1.0], "rbar": []},
        "constants": {"b": 0.25, "c": 0.25, "delta": 1.0, "M": 8.0, "K_lambda": 4.01, "k_g": 0.5, "K_g": 0.5},
    }


def drift_boundary():
    n = 64
    ys = [j / n for j in range(n)]
    nodes = ys + [1.0]
    shrink = [0.8, 0.5, 0.2]
    slope = 4.0
    g = [1.0 + slope * y for y in nodes]

    def q_row(y, a):
        top = int(math.floor(y * shrink[a] * n + 1e-9))
        return uniform_row(n, list(range(0, top + 1)))

    rates = [[0.2 + 0.3 * y + 0.5 * a for a in range(3)] for y in nodes]
    floor = [0.2 + 0.3 * y for y in nodes]
    running = [[1.0 + 2.0 * y + 0.6 * a * a for a in range(3)] for y in nodes]
    boundary = [[5.0 + a for a in range(3)]]
    kernel = [[q_row(y, a) for a in range(3)] for y in nodes]
    qg = [[sum(p * gg for p, gg in zip(kernel[k][a], g[:n])) for a in range(3)] for k in range(n + 1)]

    c, delta = 0.5, 1.0
    lhs = max(0.5 * (1 + y) * slope + c * g[k] - rates[k][a] * (g[k] - qg[k][a])
              for k, y in enumerate(ys) for a in range(3))
    rbar = 0.9 * (g[n] - max(qg[n]))
    m_cost = max(running[k][a] / g[k] for k in range(n + 1) for a in range(3))
    m_bnd = (c + delta) * max(boundary[0]) / rbar
    t_star = 2.0 * math.log(2.0)
    return {
        "schema": "pdmp-model/1",
        "name": "drift_boundary",
        "grid": {"points": ys, "boundary_points": [1.0]},
        "actions": {"values": [0.0, 1.0, 2.0]},
        "flow": {"kind": "affine1d", "alpha0": 0.5, "alpha1": 0.5, "domain": [0.0, 1.0]},
        "rates": {"lambda": rates, "lambda_floor": floor},
        "kernel": {"Q": kernel},
        "costs": {"running": running, "boundary": boundary},
        "lyapunov": {"g": g, "rbar": [rbar]},
        "constants": {
            "b": round(lhs + 0.1, 6),
            "c": c,
            "delta": delta,
            "M": round(1.01 * max(m_cost, m_bnd), 6),
            "K_lambda": round((math.exp(c * t_star) - 1.0) / c + 0.01, 6),
            "k_g": 0.5,
            "K_g": round(max(max(r) for r in qg) + 0.01, 6),
        },
    }


def boundary_cycle():
    n = 64
    ys = [j / n for j in range(n)]
    nodes = ys + [1.0]
    r0 = 2.0
    c, delta = 1.0, 1.0
    return {
        "schema": "pdmp-model/1",
        "name": "boundary_cycle",
        "grid": {"points": ys, "boundary_points": [1.0]},
        "actions": {"values": [0.0]},
        "flow": {"kind": "affine1d", "alpha0": 1.0, "alpha1": 0.0, "domain": [0.0, 1.0]},
        "rates": {"lambda": [[0.0] for _ in nodes], "lambda_floor": [0.0 for _ in nodes]},
        "kernel": {"Q": [[point_row(n, 0)] for _ in nodes]},
        "costs": {"running": [[0.0] for _ in nodes], "boundary": [[r0]]},
        "lyapunov": {"g": [1.0 + 2.0 * y for y in nodes], "rbar": [1.0]},
        "constants": {"b": 2.0 + 3.0 * c, "c": c, "delta": delta, "M": r0 * (c + delta), "K_lambda": 2.0,
                      "k_g": 0.5, "K_g": 1.0},
    }


def decay_model():
    ys = [round(0.1 * (j + 1), 10) for j in range(20)]
    n = len(ys)
    reach = [0.4, 0.2]
    g = [1.0 + y for y in ys]

    def q_row(k, a):
        top = ys[k] + reach[a] + 1e-9
        return uniform_row(n, [j for j in range(k, n) if ys[j] <= top])

    rates = [[1.0 - 0.4 * a + 0.2 * y for a in range(2)] for y in ys]
    running = [[y + 0.15 * a for a in range(2)] for y in ys]
    kernel = [[q_row(k, a) for a in range(2)] for k in range(n)]
    qg = [[sum(p * gg for p, gg in zip(kernel[k][a], g)) for a in range(2)] for k in range(n)]
    c = 0.25
    lhs = max(-0.5 * y + c * g[k] - rates[k][a] * (g[k] - qg[k][a]) for k, y in enumerate(ys) for a in range(2))
    return {
        "schema": "pdmp-model/1",
        "name": "decay_model",
        "grid": {"points": ys, "boundary_points": []},
        "actions": {"values": [0.0, 1.0]},
        "flow": {"kind": "affine1d", "alpha0": 0.0, "alpha1": -0.5},
        "rates": {"lambda": rates, "lambda_floor": [0.5] * n},
        "kernel": {"Q": kernel},
        "costs": {"running": running, "boundary": []},
        "lyapunov": {"g": g, "rbar": []},
        "constants": {
            "b": round(max(lhs, 0.0) + 0.1, 6),
            "c": c,
            "delta": 1.0,
            "M": round(1.01 * max(running[k][a] / g[k] for k in range(n) for a in range(2)), 6),
            "K_lambda": 4.01,
            "k_g": 0.5,
            "K_g": round(max(max(r) for r in qg) + 0.01, 6),
        },
    }


if __name__ == "__main__":
    os.makedirs(OUT, exist_ok=True)
    for make in (ctmdp_toy, ctmdp_3state, drift_boundary, boundary_cycle, decay_model):
        doc = make()
        dump(doc["name"], doc)
