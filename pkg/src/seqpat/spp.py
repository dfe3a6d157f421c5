"""Safe pattern pruning: L1 path solving over the implicit pattern tree.

The full feature space (one binary column per subsequence pattern up to
max_length) is never materialized. Each screening round recomputes the
duality gap against that full space by a bounded tree traversal, then
collects the patterns that survive gap-safe screening and solves the
working-set problem by coordinate descent. The subtree bound

    u(t) = max( sum of positive y_i*alpha_i over occ(t),
                sum of negative -y_i*alpha_i over occ(t) )

dominates |sum_i alpha_i y_i x_it'| for every descendant t' of t, because a
descendant's occurrence set is a subset of occ(t). A subtree is skipped when
even u(t)*scale + r*sqrt(|occ(t)|) < lambda.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .core import LabeledDataset, flatten_sequences
from .modelsel import CvConfig, CvTable, confusion, evaluate, make_folds
from .solver import ModelSolution, unpenalized_bias

__all__ = [
    "SppConfig",
    "PathResult",
    "PatternTreeNode",
    "build_pattern_tree",
    "subtree_bound",
    "safe_prune_traverse",
    "geometric_grid",
    "fit_path",
    "fit_cv",
]


@dataclass(frozen=True)
class SppConfig:
    max_length: int = 20
    min_support_report: int = 5
    grid_size: int = 50
    grid_ratio: float = 0.01
    tol: float = 1e-6
    epochs_per_screen: int = 10
    max_epochs: int = 100_000
    keep_survivors: bool = True
    # explicit grid override (used by CV so folds share one grid); must be
    # positive and strictly decreasing
    lams: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.max_length < 1:
            raise ValueError("max_length must be >= 1")
        if self.grid_size < 1:
            raise ValueError("grid_size must be >= 1")
        if not 0.0 < self.grid_ratio < 1.0:
            raise ValueError("grid_ratio must be in (0, 1)")
        if not (math.isfinite(self.tol) and self.tol > 0.0):
            raise ValueError("tol must be finite and positive")
        if self.epochs_per_screen < 1:
            raise ValueError("epochs_per_screen must be >= 1")
        if self.lams is not None:
            lams = tuple(float(x) for x in self.lams)
            if not lams:
                raise ValueError("lams must be nonempty")
            if any(not (math.isfinite(x) and x > 0.0) for x in lams):
                raise ValueError("lams must be finite and positive")
            if any(nxt >= prev for prev, nxt in zip(lams, lams[1:])):
                raise ValueError("lams must be strictly decreasing")
            object.__setattr__(self, "lams", lams)


@dataclass(frozen=True)
class PathResult:
    lams: tuple[float, ...]
    solutions: tuple[ModelSolution, ...]
    active_set_sizes: tuple[int, ...]
    # per-lambda dicts: nodes_visited, nodes_pruned, features_screened, rounds
    stats: tuple[dict, ...]
    lam_max: float
    survivors: tuple[tuple[tuple[int, ...], ...], ...] | None = None


def geometric_grid(lam_max: float, size: int, ratio: float) -> tuple[float, ...]:
    """size lambdas from lam_max down to ratio*lam_max, geometric."""
    if size == 1:
        return (float(lam_max),)
    return tuple(float(lam_max * ratio ** (k / (size - 1))) for k in range(size))


# ---------------------------------------------------------------------------
# Explicit tree (reference implementation; the fit path uses the kernels)


@dataclass
class PatternTreeNode:
    pattern: tuple[int, ...]
    # one entry per containing sequence: (sequence index, offset past the
    # first occurrence, i.e. where the projected suffix starts)
    occurrence: tuple[tuple[int, int], ...]
    children: dict[int, "PatternTreeNode"] = field(default_factory=dict)
    pruned: bool = False


def _expand(node: PatternTreeNode, sequences) -> dict[int, list[tuple[int, int]]]:
    ext: dict[int, list[tuple[int, int]]] = {}
    for i, off in node.occurrence:
        seq = sequences[i]
        seen = set()
        for t in range(off, len(seq)):
            e = seq[t]
            if e not in seen:
                seen.add(e)
                ext.setdefault(e, []).append((i, t + 1))
    return dict(sorted(ext.items()))


def build_pattern_tree(dataset: LabeledDataset, max_length: int) -> PatternTreeNode:
    """Materialize the complete first-occurrence pattern tree.

    Exponential in general; intended for small instances and tests.
    """
    seqs = dataset.sequences
    root = PatternTreeNode((), tuple((i, 0) for i in range(len(seqs))))
    stack = [root]
    while stack:
        node = stack.pop()
        if len(node.pattern) >= max_length:
            continue
        for e, occ in _expand(node, seqs).items():
            child = PatternTreeNode(node.pattern + (e,), tuple(occ))
            node.children[e] = child
            stack.append(child)
    return root


def subtree_bound(node: PatternTreeNode, alpha, labels) -> float:
    """u(t): dominates |score| of every pattern in the subtree of node."""
    a = np.asarray(alpha, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    pos = 0.0
    neg = 0.0
    for i, _ in node.occurrence:
        vv = y[i] * a[i]
        if vv > 0.0:
            pos += vv
        else:
            neg -= vv
    return max(pos, neg)


def safe_prune_traverse(dataset: LabeledDataset, alpha, r: float, lam: float, config: SppConfig):
    """Surviving patterns of one screening sweep (reference implementation).

    Depth-first over the implicit tree: a subtree whose bound satisfies
    u(t) + r*sqrt(|occ(t)|) < lam is skipped entirely; a visited node is kept
    iff |score(t)| + r*sqrt(|occ(t)|) >= lam. All other patterns up to
    max_length are enumerated.
    """
    if dataset.labels is None:
        raise ValueError("dataset is unlabeled")
    seqs = dataset.sequences
    y = np.asarray(dataset.labels, dtype=np.float64)
    v = y * np.asarray(alpha, dtype=np.float64)
    out: set[tuple[int, ...]] = set()

    def visit(pattern, occ):
        vv = np.array([v[i] for i, _ in occ])
        pos = float(vv[vv > 0.0].sum())
        neg = float(-vv[vv < 0.0].sum())
        rad = r * math.sqrt(len(occ))
        if max(pos, neg) + rad < lam:
            return
        if abs(float(vv.sum())) + rad >= lam:
            out.add(pattern)
        if len(pattern) >= config.max_length:
            return
        node = PatternTreeNode(pattern, tuple(occ))
        for e, child_occ in _expand(node, seqs).items():
            visit(pattern + (e,), child_occ)

    node0 = PatternTreeNode((), tuple((i, 0) for i in range(len(seqs))))
    for e, occ in _expand(node0, seqs).items():
        visit((e,), occ)
    return out


# ---------------------------------------------------------------------------
# Kernel-backed traversal


class _TreeIndex:
    """Flattened dataset with events remapped to dense codes.

    Codes preserve event-id order, so ascending-code DFS enumerates patterns
    in lexicographic order of the original ids.
    """

    def __init__(self, dataset: LabeledDataset):
        if dataset.labels is None:
            raise ValueError("dataset is unlabeled")
        tokens, indptr = flatten_sequences(dataset.sequences)
        if tokens.size == 0:
            raise ValueError("dataset has no events")
        self.events = np.unique(tokens)
        self.ctok = np.searchsorted(self.events, tokens).astype(np.int64)
        self.indptr = indptr
        self.m = int(self.events.size)
        self.n = int(indptr.size - 1)
        self.y = np.asarray(dataset.labels, dtype=np.float64)
        self.root_seq = np.arange(self.n, dtype=np.int64)
        self.root_suf = indptr[:-1].copy()
        self._seen = np.zeros(self.m, dtype=np.int64)
        self._stamp = np.zeros(1, dtype=np.int64)
        self._lvl = None
        self._out = None

    def _buffers(self, max_len: int):
        # per-depth child workspace so traversal never allocates; one row of
        # lvl_seq/lvl_suf can hold every child occurrence at that depth
        if self._lvl is None or self._lvl[0] < max_len:
            width = int(self.ctok.size)
            shape = (max_len, width)
            self._lvl = (
                max_len,
                np.zeros((max_len, 3 * self.m + 1), dtype=np.int64),
                np.empty(shape, dtype=np.int64),
                np.empty(shape, dtype=np.int64),
                np.empty(shape, dtype=np.int64),
                np.empty(shape, dtype=np.int64),
                np.empty(shape, dtype=np.int64),
                np.zeros((max_len, 3 * self.m), dtype=np.float64),
            )
        return self._lvl[1:]

    def max_score(self, v, max_len: int, seed: float, stats) -> float:
        lvl_cnt, lvl_seq, lvl_suf = self._buffers(max_len)[:3]
        return float(
            _kernels._tree_max_rec(
                self.ctok, self.indptr, self.m, v, self.root_seq, self.root_suf,
                0, max_len, float(seed), lvl_cnt, lvl_seq, lvl_suf,
                self._seen, self._stamp, stats,
            )
        )

    def _collectors(self):
        # collection buffers are bounded on purpose: when a sweep fills them
        # it saturates (keeps walking for the exact max, stops emitting) and
        # the solver picks up the rest on a later round once the iterate has
        # tightened. Unbounded collection can exhaust memory at small lam.
        # htab is the sweep-local dedup table; 2x the node cap keeps the
        # open-addressing load under a half.
        if self._out is None:
            cap_nodes = 1 << 14
            self._out = (
                np.empty(1 << 17, dtype=np.int64),
                np.empty(cap_nodes + 1, dtype=np.int64),
                np.empty(1 << 22, dtype=np.int64),
                np.empty(cap_nodes + 1, dtype=np.int64),
                np.empty(cap_nodes, dtype=np.float64),
                np.empty(cap_nodes, dtype=np.uint64),
                np.zeros(2 * cap_nodes, dtype=np.uint64),
            )
        return self._out

    def grow_collectors(self):
        if self._out is None:
            self._collectors()
        out_pat, out_pat_ptr, out_occ, _, _, _, _ = self._out
        cap_nodes = 4 * (out_pat_ptr.size - 1)
        self._out = (
            np.empty(4 * out_pat.size, dtype=np.int64),
            np.empty(cap_nodes + 1, dtype=np.int64),
            np.empty(4 * out_occ.size, dtype=np.int64),
            np.empty(cap_nodes + 1, dtype=np.int64),
            np.empty(cap_nodes, dtype=np.float64),
            np.empty(cap_nodes, dtype=np.uint64),
            np.zeros(2 * cap_nodes, dtype=np.uint64),
        )

    def certify(self, v, thresh: float, max_len: int, seed: float, stats, known_hashes=None):
        """Max |score| over all patterns (exact when it reaches thresh) plus
        patterns scoring at least thresh, in DFS (lexicographic) order.

        Columns hashing into known_hashes (sorted uint64, typically the
        caller's working set) are walked but not collected; within the sweep
        each distinct column is collected once. Returns (best, batch,
        saturated). The batch borrows the index's reusable buffers, so
        consume it before the next sweep; saturated means it is a prefix of
        the qualifying set, not all of it.
        """
        lvl_cnt, lvl_seq, lvl_suf, lvl_fe, lvl_fseq, lvl_fsuf, lvl_val = self._buffers(max_len)
        out_pat, out_pat_ptr, out_occ, out_occ_ptr, out_score, out_hash, htab = self._collectors()
        if known_hashes is None:
            known_hashes = np.empty(0, dtype=np.uint64)
        out_pat_ptr[0] = 0
        out_occ_ptr[0] = 0
        htab.fill(0)
        cur = np.zeros(4, dtype=np.int64)
        sweep = np.zeros(4, dtype=np.int64)
        path = np.zeros(max(max_len, 1), dtype=np.int64)
        best = _kernels._tree_cert_rec(
            self.ctok, self.indptr, self.m, v, float(thresh),
            self.root_seq, self.root_suf, 0, max_len, float(seed), path,
            out_pat, out_pat_ptr, out_occ, out_occ_ptr, out_score, out_hash, cur,
            known_hashes, htab,
            lvl_cnt, lvl_seq, lvl_suf, lvl_fe, lvl_fseq, lvl_fsuf, lvl_val,
            self._seen, self._stamp, sweep,
        )
        stats += sweep
        batch = (int(cur[0]), out_pat, out_pat_ptr, out_occ, out_occ_ptr, out_hash)
        return float(best), batch, bool(cur[3])

    def decode_batch(self, batch, known=frozenset()):
        """Patterns, occurrence columns, and column hashes from a sweep batch
        whose column bytes are not in known, duplicates dropped keeping first
        in DFS (lexicographically least) order."""
        nn, out_pat, out_pat_ptr, out_occ, out_occ_ptr, out_hash = batch
        seen = set()
        pats = []
        cols = []
        hashes = []
        for t in range(nn):
            occ = out_occ[out_occ_ptr[t] : out_occ_ptr[t + 1]]
            key = occ.tobytes()
            if key in known or key in seen:
                continue
            seen.add(key)
            codes = out_pat[out_pat_ptr[t] : out_pat_ptr[t + 1]]
            pats.append(tuple(self.events[codes].tolist()))
            cols.append(occ.copy())
            hashes.append(out_hash[t])
        return pats, cols, hashes


# ---------------------------------------------------------------------------
# Path fitting


class _WorkingSet:
    """Mutable ordered feature set with its CSC arrays and aligned weights.

    Order is append order (deterministic); coordinate descent cycles in this
    order. Columns are unique by occurrence set.
    """

    def __init__(self, n: int):
        self.n = n
        self.pats: list[tuple[int, ...]] = []
        self.cols: list[np.ndarray] = []
        self.keys: set[bytes] = set()
        self.hashes: list[np.uint64] = []  # kernel-computed, one per column
        self.w = np.empty(0, dtype=np.float64)
        self._dirty = True
        self._indptr = np.zeros(1, dtype=np.int64)
        self._indices = np.empty(0, dtype=np.int64)

    def arrays(self):
        if self._dirty:
            self._indptr = np.zeros(len(self.cols) + 1, dtype=np.int64)
            for j, c in enumerate(self.cols):
                self._indptr[j + 1] = self._indptr[j] + c.size
            self._indices = (
                np.concatenate(self.cols) if self.cols else np.empty(0, dtype=np.int64)
            )
            self._dirty = False
        return self._indptr, self._indices

    def add(self, pats, cols, hashes) -> int:
        added = 0
        for p, c, h in zip(pats, cols, hashes):
            key = c.tobytes()
            if key in self.keys:
                continue
            self.keys.add(key)
            self.pats.append(p)
            self.cols.append(c)
            self.hashes.append(h)
            added += 1
        if added:
            self.w = np.concatenate([self.w, np.zeros(added)])
            self._dirty = True
        return added

    def filter(self, keep: np.ndarray) -> int:
        if keep.all():
            return 0
        removed = len(self.pats) - int(keep.sum())
        self.pats = [p for p, k in zip(self.pats, keep) if k]
        self.cols = [c for c, k in zip(self.cols, keep) if k]
        self.hashes = [h for h, k in zip(self.hashes, keep) if k]
        self.keys = {c.tobytes() for c in self.cols}
        self.w = self.w[keep]
        self._dirty = True
        return removed

    def hash_array(self) -> np.ndarray:
        return np.sort(np.asarray(self.hashes, dtype=np.uint64))

    def sizes(self) -> np.ndarray:
        return np.array([c.size for c in self.cols], dtype=np.float64)


def fit_path(dataset: LabeledDataset, config: SppConfig = SppConfig()) -> PathResult:
    """Solve the L1 path over the full pattern space by safe pattern pruning.

    Per lambda, rounds alternate: recompute the duality gap against the FULL
    pattern space (the max |score| over all patterns comes from a bounded
    tree traversal), gap-safe screen the working set, collect the patterns
    whose score reaches lambda (another bounded traversal), then run a few
    coordinate-descent epochs on the working set. Convergence is declared
    only on the full-space gap certificate, so screening can never corrupt a
    solution. Warm starts carry (w, b) and the working set down the grid.
    """
    idx = _TreeIndex(dataset)
    y = idx.y
    n = idx.n
    if not ((y == 1.0).any() and (y == -1.0).any()):
        raise ValueError("both classes must be present")

    b = unpenalized_bias(y)
    alpha0 = 2.0 * np.maximum(0.0, 1.0 - y * b)
    warm_stats = np.zeros(4, dtype=np.int64)
    lam_max = idx.max_score(y * alpha0, config.max_length, 0.0, warm_stats)

    if config.lams is not None:
        grid = config.lams
    else:
        grid = geometric_grid(lam_max, config.grid_size, config.grid_ratio)

    ws = _WorkingSet(n)
    sols = []
    act_sizes = []
    stats_all = []
    survivors_all = [] if config.keep_survivors else None
    carried = None

    for ki, lam in enumerate(grid):
        tstats = np.zeros(4, dtype=np.int64)
        screened = 0
        rounds = 0
        epochs_used = 0
        converged = False
        gap = math.inf
        primal = math.inf
        # sweeps collect down to the next grid point's floor, so the sweep
        # that certifies convergence here doubles as the opening collection
        # for the next lambda (same iterate, lower floor) and is carried
        # over instead of repeated
        floor = grid[ki + 1] if ki + 1 < len(grid) else lam
        floor *= 1.0 - 1e-9
        prev_gap = math.inf
        exact_sweep = False

        while True:
            rounds += 1
            indptr, indices = ws.arrays()
            f = _kernels.compute_f(indptr, indices, ws.w, b, n)
            resid = np.maximum(0.0, 1.0 - y * f)
            primal = float(resid @ resid) + lam * float(np.abs(ws.w).sum())
            alpha_c = _kernels.project_alpha(2.0 * resid, y)
            v = y * alpha_c
            scores = _kernels.col_sums(indptr, indices, v)
            fresh = carried is None
            if not fresh:
                # w, b, and hence alpha are untouched since the sweep that
                # produced it, so max and batch are still exact for this v
                big, batch, saturated = carried
                carried = None
            else:
                seed = float(np.abs(scores).max()) if scores.size else 0.0
                # one sweep both certifies (max |score| over the full
                # space, so the rescaled dual is feasible there) and
                # collects every pattern whose score reaches the floor;
                # the 1e-9 slack absorbs rounding so the arg max is never
                # missed
                big, batch, saturated = idx.certify(
                    v, floor, config.max_length, seed, tstats,
                    None if exact_sweep else ws.hash_array(),
                )
            scale = min(1.0, lam / big) if big > 0.0 else 1.0
            alpha = scale * alpha_c
            dual = float(np.sum(alpha - 0.25 * alpha * alpha))
            gap = max(primal - dual, 0.0)
            if gap <= config.tol * max(1.0, primal):
                converged = True
                if fresh:
                    # a batch consumed from a previous carry was collected
                    # at the higher old floor; only a sweep made at this
                    # lambda's floor is valid for the next grid point
                    carried = (big, batch, saturated)
                break
            if epochs_used >= config.max_epochs:
                break

            # safe removal inside the working set; certificates at fixed
            # lambda are permanent, so removal is final for this lambda
            r = 2.0 * math.sqrt(gap)
            removed = 0
            if len(ws.pats):
                keep = np.abs(scale * scores) + r * np.sqrt(ws.sizes()) >= lam
                removed = ws.filter(keep)
                screened += removed
            pats, cols, hs = idx.decode_batch(batch, known=ws.keys)
            added = ws.add(pats, cols, hs)
            if saturated and added == 0:
                # every collected pattern was already on board, so a full
                # batch told us nothing new; widen the collectors or the
                # next sweep would return the same prefix
                idx.grow_collectors()
            stalled = (
                fresh and not saturated and added == 0 and removed == 0
                and not gap < prev_gap
            )
            if stalled and exact_sweep:
                # even a sweep with hash skipping off found nothing and the
                # gap is frozen: no further progress is possible in floats
                break
            # a stalled round with skipping on could in principle be a hash
            # collision hiding a violator; one exact sweep rules that out
            exact_sweep = stalled
            prev_gap = gap

            # solve the working set until its own (cheaper, optimistic) gap
            # clears a fraction of the full gap, then re-certify and
            # re-traverse; cd_epochs maintains f in place between chunks
            indptr, indices = ws.arrays()
            f = _kernels.compute_f(indptr, indices, ws.w, b, n)
            target = max(config.tol * max(1.0, primal), 0.005 * gap)
            eps = 1e-10 * max(1.0, lam)
            while True:
                b, used = _kernels.cd_epochs(
                    indptr, indices, y, f, ws.w, b, lam,
                    config.epochs_per_screen, eps,
                )
                b = float(b)
                epochs_used += int(used)
                if used < config.epochs_per_screen:
                    break  # exact sweep fixed point; nothing further moves
                if epochs_used >= config.max_epochs:
                    break
                residw = np.maximum(0.0, 1.0 - y * f)
                pw = float(residw @ residw) + lam * float(np.abs(ws.w).sum())
                ac = _kernels.project_alpha(2.0 * residw, y)
                vw = y * ac
                sc = _kernels.col_sums(indptr, indices, vw)
                mw = float(np.abs(sc).max()) if sc.size else 0.0
                sw = min(1.0, lam / mw) if mw > 0.0 else 1.0
                aw = sw * ac
                dw = float(np.sum(aw - 0.25 * aw * aw))
                if max(pw - dw, 0.0) <= target:
                    # exact polishing epoch: coordinates parked on crumbs
                    # inside the stationarity slack return to hard zeros
                    # before the certificate (and any carried sweep) fires
                    b, used = _kernels.cd_epochs(
                        indptr, indices, y, f, ws.w, b, lam, 1, 0.0
                    )
                    b = float(b)
                    epochs_used += int(used)
                    break

        weights = {}
        supports = {}
        for j, p in enumerate(ws.pats):
            if ws.w[j] != 0.0:
                weights[p] = float(ws.w[j])
                supports[p] = int(ws.cols[j].size)
        order = sorted(weights, key=lambda p: (-supports[p], p))
        sols.append(
            ModelSolution(
                weights={p: weights[p] for p in order},
                bias=float(b),
                lam=float(lam),
                duality_gap=float(gap),
                primal_objective=float(primal),
                iterations=epochs_used,
                converged=converged,
                supports={p: supports[p] for p in order},
            )
        )
        act_sizes.append(len(ws.pats))
        stats_all.append(
            {
                "nodes_visited": int(tstats[0]),
                "nodes_pruned": int(tstats[1]),
                "features_screened": screened,
                "rounds": rounds,
            }
        )
        if survivors_all is not None:
            survivors_all.append(tuple(ws.pats))

    return PathResult(
        lams=tuple(float(x) for x in grid),
        solutions=tuple(sols),
        active_set_sizes=tuple(act_sizes),
        stats=tuple(stats_all),
        lam_max=float(lam_max),
        survivors=tuple(survivors_all) if survivors_all is not None else None,
    )


# ---------------------------------------------------------------------------
# Cross-validated fitting


def _subset(dataset: LabeledDataset, which) -> LabeledDataset:
    seqs = tuple(dataset.sequences[i] for i in which)
    labs = tuple(dataset.labels[i] for i in which)
    return LabeledDataset(sequences=seqs, labels=labs)


def _cv_job(args):
    dataset, config, cv, rep, fold = args
    labels = np.asarray(dataset.labels)
    train_idx, val_idx = make_folds(labels, cv, rep)[fold]
    train = _subset(dataset, train_idx)
    val = _subset(dataset, val_idx)
    path = fit_path(train, config)
    accs = tuple(evaluate(sol, val) for sol in path.solutions)
    nnzs = tuple(sol.nnz for sol in path.solutions)
    confs = tuple(confusion(sol, val) for sol in path.solutions)
    return rep, fold, accs, nnzs, confs


def fit_cv(
    dataset: LabeledDataset,
    config: SppConfig = SppConfig(),
    cv: CvConfig = CvConfig(),
    threads: int = 1,
):
    """Select lambda by repeated stratified CV, refit on the full data.

    All folds share one grid anchored at the full-data lambda_max so that
    per-lambda scores aggregate across folds. Returns
    (best lambda, refit ModelSolution, CvTable). Ties in mean accuracy go to
    the larger lambda (sparser model). Results do not depend on threads.
    """
    idx = _TreeIndex(dataset)
    y = idx.y
    if not ((y == 1.0).any() and (y == -1.0).any()):
        raise ValueError("both classes must be present")
    if config.lams is not None:
        grid = config.lams
    else:
        b0 = unpenalized_bias(y)
        alpha0 = 2.0 * np.maximum(0.0, 1.0 - y * b0)
        stats = np.zeros(4, dtype=np.int64)
        lam_max = idx.max_score(y * alpha0, config.max_length, 0.0, stats)
        grid = geometric_grid(lam_max, config.grid_size, config.grid_ratio)

    fold_config = replace(config, lams=grid, keep_survivors=False)
    jobs = [
        (dataset, fold_config, cv, rep, fold)
        for rep in range(cv.repeats)
        for fold in range(cv.folds)
    ]
    if threads > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_cv_job, jobs))
    else:
        results = [_cv_job(j) for j in jobs]
    results.sort(key=lambda t: (t[0], t[1]))

    acc = np.array([r[2] for r in results], dtype=np.float64)
    nnz = np.array([r[3] for r in results], dtype=np.float64)
    conf = np.array([r[4] for r in results], dtype=np.float64)
    mean_acc = acc.mean(axis=0)
    std_acc = acc.std(axis=0, ddof=1) if acc.shape[0] > 1 else np.zeros(acc.shape[1])
    mean_nnz = nnz.mean(axis=0)
    mean_conf = conf.mean(axis=0)

    best_k = int(np.argmax(mean_acc))  # first max = largest lambda
    best_lam = grid[best_k]
    refit = fit_path(dataset, replace(config, lams=grid[: best_k + 1]))
    final = refit.solutions[-1]
    table = CvTable(
        lams=tuple(grid),
        mean_acc=tuple(float(x) for x in mean_acc),
        std_acc=tuple(float(x) for x in std_acc),
        mean_nnz=tuple(float(x) for x in mean_nnz),
        confusion=tuple(tuple(float(x) for x in row) for row in mean_conf),
    )
    return best_lam, final, table
