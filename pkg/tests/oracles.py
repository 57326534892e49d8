"""Brute-force reference implementations, written independently of the package."""
import math


def hist_embed(image, bins=8):
    H, W, C = image.shape
    counts = [0.0] * (C * bins)
    for y in range(H):
        for x in range(W):
            for c in range(C):
                b = min(max(int(math.floor(image[y, x, c] * bins)), 0), bins - 1)
                counts[c * bins + b] += 1
    norm = math.sqrt(sum(v * v for v in counts))
    return [v / norm for v in counts]


def grid_embed(image, grid=4):
    H, W, C = image.shape

    def spans(n):
        base, extra = divmod(n, grid)
        out, start = [], 0
        for i in range(grid):
            size = base + (1 if i < extra else 0)
            out.append(range(start, start + size))
            start += size
        return out

    feats = []
    for rows in spans(H):
        for cols in spans(W):
            for c in range(C):
                vals = [image[y, x, c] for y in rows for x in cols]
                feats.append(sum(vals) / len(vals))
    norm = math.sqrt(sum(v * v for v in feats))
    return [v / norm for v in feats]


def cos(a, b):
    return sum(x * y for x, y in zip(a, b))


def cosine_table(gen, ref, embed):
    ge = [embed(g) for g in gen]
    re = [embed(r) for r in ref]
    return [[cos(a, b) for b in re] for a in ge]


def pair_table(gen, ref):
    out = []
    for g in gen:
        row = []
        for r in ref:
            if g.shape == r.shape and (g == r).all():
                row.append(0.0)
            else:
                row.append(min(max(1 - cos(hist_embed(g), hist_embed(r)), 0.0), 1.0))
        out.append(row)
    return out


def v2r_max(table):
    return sum(max(row) for row in table) / len(table)


def r2v_max(table):
    cols = range(len(table[0]))
    return sum(max(row[j] for row in table) for j in cols) / len(cols)


def v2r_min(table):
    return sum(min(row) for row in table) / len(table)


def r2v_min(table):
    cols = range(len(table[0]))
    return sum(min(row[j] for row in table) for j in cols) / len(cols)


def nn(source, target):
    total = 0.0
    for p in source:
        total += min(math.dist(p, q) for q in target)
    return total / len(source)


def pixel_cloud(images):
    pts = []
    for img in images:
        H, W, _ = img.shape
        for y in range(H):
            for x in range(W):
                r = y / (H - 1) if H > 1 else 0.0
                c = x / (W - 1) if W > 1 else 0.0
                pts.append((r, c, float(img[y, x].mean())))
    return pts


def bbox_diag(points):
    dims = range(len(points[0]))
    d = math.sqrt(sum((max(p[k] for p in points) - min(p[k] for p in points)) ** 2 for k in dims))
    return d if d > 0 else 1.0


def all_eight(gen, ref):
    dino = cosine_table(gen, ref, hist_embed)
    clip = cosine_table(gen, ref, grid_embed)
    met = pair_table(gen, ref)
    pg, pr = pixel_cloud(gen), pixel_cloud(ref)
    s = bbox_diag(pg + pr)
    pg = [tuple(v / s for v in p) for p in pg]
    pr = [tuple(v / s for v in p) for p in pr]
    return {
        "s_dino_v2r": v2r_max(dino), "s_dino_r2v": r2v_max(dino),
        "s_clip_v2r": v2r_max(clip), "s_clip_r2v": r2v_max(clip),
        "s_met3r_v2r": v2r_min(met), "s_met3r_r2v": r2v_min(met),
        "d_nn_v2r": nn(pg, pr), "d_nn_r2v": nn(pr, pg),
    }
