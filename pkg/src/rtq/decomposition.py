"""Exact stochastic representations of the conditional-distribution factors.

Every factor of the stationary transforms has a constructive probabilistic
form: the high-priority busy period is a branching tree of services, the
batch size X_g is one customer or the low-priority arrivals over a busy
period, Ka/Kb/Kc are mixtures, batched Poisson sums and geometric compounds
of those pieces, and the idle-orbit count is a compound Poisson whose batch
law is a size-biased rejection of K.  Sampling these and comparing against
the analytic transforms is the strongest correctness check in the package,
so the samplers here are exact in distribution up to two documented,
quantified table truncations.

All samplers are vectorised; a million draws of any target is seconds, not
minutes.
"""

from __future__ import annotations

import numpy as np

from . import transforms
from .errors import RecursionDepthExceeded, TableTruncation
from .model import ModelParams

__all__ = ["make_rng", "DecompositionSampler", "PAIR_TARGETS", "SCALAR_TARGETS"]

SCALAR_TARGETS = ("xg", "ka", "kb", "kc", "k", "r0")
PAIR_TARGETS = ("h1", "h2", "m1", "m2", "s1", "s2", "r1", "r2")


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Independent generator for (seed, stream); streams never overlap."""
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(stream,)))
    )


class DecompositionSampler:
    """Draws from the factor laws of a fixed parameter set.

    Heavy one-off tables (the Ka pmf, the size-biased arrival-count tables
    used by the H factors) are built lazily and cached on the instance, so
    reuse the sampler across calls.
    """

    def __init__(self, params: ModelParams, seed: int = 0, stream: int = 0):
        self.params = params
        self.rng = make_rng(seed, stream)
        self._ka_cum = None
        self._h_cum = {}
        self._k_total = None

    # ------------------------------------------------------------------
    # primitives

    def busy_durations(self, n: int, max_nodes: int | None = None) -> np.ndarray:
        """Lengths of n independent high-priority busy periods.

        Each period is the total service time of a branching tree: the root
        customer's service, plus one subtree per priority arrival during any
        service in the tree.
        """
        p = self.params
        rng = self.rng
        budget = max_nodes if max_nodes is not None else max(1_000_000, 30 * n)
        svc = p.dist1.sample(rng, n)
        total = svc.copy()
        owner = np.arange(n)
        used = n
        while owner.size:
            kids = rng.poisson(p.lambda1 * svc)
            used += int(kids.sum())
            if used > budget:
                raise RecursionDepthExceeded(
                    f"busy-period trees exceeded {budget} services"
                )
            owner = np.repeat(owner, kids)
            if owner.size == 0:
                break
            svc = p.dist1.sample(rng, owner.size)
            total += np.bincount(owner, weights=svc, minlength=n)
        return total

    def sample_xg(self, n: int) -> np.ndarray:
        """Orbit input of one effective arrival: itself (low priority) or
        the low-priority arrivals over one busy period (high priority)."""
        p = self.params
        out = np.ones(n, dtype=np.int64)
        hi = self.rng.random(n) < p.q
        m = int(hi.sum())
        if m:
            out[hi] = self.rng.poisson(p.lambda2 * self.busy_durations(m))
        return out

    def _sum_xg(self, counts: np.ndarray) -> np.ndarray:
        """Independent sums of X_g, one sum per entry of `counts`."""
        total = int(counts.sum())
        if total == 0:
            return np.zeros(counts.size, dtype=np.int64)
        xg = self.sample_xg(total)
        owner = np.repeat(np.arange(counts.size), counts)
        return np.bincount(owner, weights=xg, minlength=counts.size).astype(np.int64)

    # ------------------------------------------------------------------
    # the orbit factors

    def _ka_table(self):
        # Ka's pgf is available in closed form, so its pmf comes from one
        # contour inversion; the unrecovered tail (~1e-6 here) is folded
        # back proportionally rather than rejected at draw time.
        if self._ka_cum is None:
            pmf = transforms.extract_pmf(
                lambda z: transforms.factor_K(self.params, z).ka,
                n=8192,
                radius=0.999,
                label="ka-table",
            )
            probs = pmf.probs / pmf.probs.sum()
            self._ka_cum = np.cumsum(probs)
        return self._ka_cum

    def sample_ka(self, n: int) -> np.ndarray:
        cum = self._ka_table()
        return np.searchsorted(cum, self.rng.random(n)).astype(np.int64)

    def sample_kb(self, n: int) -> np.ndarray:
        """Batched Poisson: effective arrivals over an equilibrium-biased
        service of the merged stream, each contributing an X_g."""
        p = self.params
        t = p.mixed_service_eq.sample(self.rng, n)
        return self._sum_xg(self.rng.poisson(p.lam * t))

    def _xc(self, n: int) -> np.ndarray:
        # one geometric-stage increment: a Ka plus the orbit input of the
        # arrivals over an equilibrium low-priority service
        p = self.params
        t = p.dist2_eq.sample(self.rng, n)
        return self.sample_ka(n) + self._sum_xg(self.rng.poisson(p.lam * t))

    def sample_kc(self, n: int) -> np.ndarray:
        stages = self.rng.geometric(1.0 - self.params.vartheta, n) - 1
        total = int(stages.sum())
        if total == 0:
            return np.zeros(n, dtype=np.int64)
        xc = self._xc(total)
        owner = np.repeat(np.arange(n), stages)
        return np.bincount(owner, weights=xc, minlength=n).astype(np.int64)

    def sample_k(self, n: int) -> np.ndarray:
        return self.sample_ka(n) + self.sample_kb(n) + self.sample_kc(n)

    def sample_r0(self, n: int) -> np.ndarray:
        """Orbit size given an idle server: compound Poisson whose batch is
        an accepted K draw plus one (acceptance probability 1/(K+1))."""
        if self._k_total is None:
            self._k_total = float(
                transforms._k_integral(self.params, np.array([0.0 + 0j]))[0].real
            )
        c = self._k_total
        counts = self.rng.poisson(self.params.psi * c, n)
        need = int(counts.sum())
        accepted = []
        got = 0
        while got < need:
            block = max(1024, int((need - got) / c * 1.2))
            cand = self.sample_k(block)
            keep = cand[self.rng.random(block) * (cand + 1.0) < 1.0]
            accepted.append(keep)
            got += keep.size
        sizes = np.concatenate(accepted)[:need] + 1
        owner = np.repeat(np.arange(n), counts)
        return np.bincount(owner, weights=sizes, minlength=n).astype(np.int64)

    # ------------------------------------------------------------------
    # bivariate (queue, orbit) factors

    def sample_split(self, counts: np.ndarray, c: float):
        """Independently mark each of `counts` items with probability c."""
        first = self.rng.binomial(counts, c)
        return first.astype(np.int64), (counts - first).astype(np.int64)

    def _h_table(self, which: int):
        # size-biased law of the number of effective arrivals during one
        # type-`which` service: weight k * b_k, truncated once the kept
        # mass reaches 1 - 1e-8
        if which not in self._h_cum:
            p = self.params
            dist = p.dist1 if which == 1 else p.dist2
            norm = p.lam * dist.mean
            kmax = 4096
            while True:
                b = dist.poisson_mixture_pmf(p.lam, kmax)
                w = np.arange(kmax + 1) * b / norm
                cum = np.cumsum(w)
                if cum[-1] >= 1.0 - 1e-8:
                    break
                if kmax >= 1 << 22:
                    raise TableTruncation(
                        f"size-biased table for type {which} still missing "
                        f"{1 - cum[-1]:.2e} mass at {kmax} entries"
                    )
                kmax *= 4
            self._h_cum[which] = cum
        return self._h_cum[which]

    def sample_h_pair(self, which: int, n: int):
        """One step of the difference-quotient factor H for type `which`.

        Draw a size-biased arrival count k, a uniform position i in 1..k;
        the i-1 earlier arrivals go to queue/orbit by type, the k-i later
        ones contribute whole X_g batches to the orbit.
        """
        cum = self._h_table(which)
        u = self.rng.random(n)
        k = np.searchsorted(cum, u)
        if np.any(k >= cum.size):
            raise TableTruncation(
                f"draw beyond the size-biased table for type {which}"
            )
        k = k.astype(np.int64)  # k >= 1 almost surely (weight 0 at k = 0)
        i = self.rng.integers(1, k + 1)
        n1 = self.rng.binomial(i - 1, self.params.q).astype(np.int64)
        n2 = (i - 1 - n1) + self._sum_xg(k - i)
        return n1, n2

    def sample_s_pair(self, which: int, n: int):
        """Arrivals during an equilibrium type-`which` service, by type."""
        p = self.params
        dist = p.dist1_eq if which == 1 else p.dist2_eq
        k = self.rng.poisson(p.lam * dist.sample(self.rng, n))
        return self.sample_split(k, p.q)

    def sample_m1_pair(self, n: int):
        """Geometric compound of H factors for the high-priority class."""
        stages = self.rng.geometric(1.0 - self.params.rho1, n) - 1
        total = int(stages.sum())
        q_out = np.zeros(n, dtype=np.int64)
        o_out = np.zeros(n, dtype=np.int64)
        if total:
            h1, h2 = self.sample_h_pair(1, total)
            owner = np.repeat(np.arange(n), stages)
            q_out += np.bincount(owner, weights=h1, minlength=n).astype(np.int64)
            o_out += np.bincount(owner, weights=h2, minlength=n).astype(np.int64)
        return q_out, o_out

    def sample_m2_pair(self, n: int):
        """With probability vartheta an H factor for the low-priority class
        plus an extra Ka and Kc in the orbit; otherwise nothing."""
        vt = self.params.vartheta
        on = self.rng.random(n) < vt
        m = int(on.sum())
        q_out = np.zeros(n, dtype=np.int64)
        o_out = np.zeros(n, dtype=np.int64)
        if m:
            h1, h2 = self.sample_h_pair(2, m)
            q_out[on] = h1
            o_out[on] = h2 + self.sample_ka(m) + self.sample_kc(m)
        return q_out, o_out

    def sample_r1_pair(self, n: int):
        """(queue, orbit) given a high-priority service in progress."""
        q1, o1 = self.sample_m2_pair(n)
        q2, o2 = self.sample_m1_pair(n)
        q3, o3 = self.sample_s_pair(1, n)
        return q1 + q2 + q3, o1 + o2 + o3 + self.sample_r0(n)

    def sample_r2_pair(self, n: int):
        """(queue, orbit) given a low-priority service in progress."""
        q1, o1 = self.sample_s_pair(2, n)
        o1 = o1 + self.sample_ka(n) + self.sample_kc(n) + self.sample_r0(n)
        return q1, o1

    # ------------------------------------------------------------------
    # dispatch

    def sample(self, target: str, n: int):
        """Draw n values of a named factor; pair targets return a tuple."""
        target = target.lower()
        if target in SCALAR_TARGETS:
            return getattr(self, f"sample_{target}")(n)
        pairs = {
            "h1": lambda: self.sample_h_pair(1, n),
            "h2": lambda: self.sample_h_pair(2, n),
            "s1": lambda: self.sample_s_pair(1, n),
            "s2": lambda: self.sample_s_pair(2, n),
            "m1": lambda: self.sample_m1_pair(n),
            "m2": lambda: self.sample_m2_pair(n),
            "r1": lambda: self.sample_r1_pair(n),
            "r2": lambda: self.sample_r2_pair(n),
        }
        if target in pairs:
            return pairs[target]()
        raise ValueError(
            f"unknown target {target!r}; choose from "
            f"{', '.join(SCALAR_TARGETS + PAIR_TARGETS)}"
        )
