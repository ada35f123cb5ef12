"""Hot numeric kernels, each in a numba and a pure-numpy flavour.

The public functions at the bottom dispatch on :func:`subplanck._accel.use_numba`.
Both flavours compute the same sums in the same per-point order, so results
agree to rounding; the numba versions parallelise over output rows/points
only, which keeps every per-point reduction sequential and therefore
independent of the thread count.
"""

import math

import numpy as np

from subplanck._accel import njit, prange, use_numba

# exp(-60) ~ 1e-26: Gaussian factors below this are dropped in the numba term kernel
GAUSS_CUT = 60.0


# --------------------------------------------------------------------------
# separable sum of complex Gaussian terms on a rectangular grid
# --------------------------------------------------------------------------

@njit(parallel=True)
def _term_grid_nb(xs, ps, amp, mx, mp, dx, dp, kappa, cut):
    nx = xs.size
    npp = ps.size
    nt = amp.size
    ptab = np.empty((nt, npp), np.complex128)
    lo = np.zeros(nt, np.int64)
    hi = np.zeros(nt, np.int64)
    for t in prange(nt):
        first = npp
        last = -1
        for j in range(npp):
            d = ps[j] - mp[t]
            g = -d * d / kappa
            ptab[t, j] = np.exp(complex(g, -dx[t] * d))
            if g >= -cut:
                if j < first:
                    first = j
                last = j
        lo[t] = first
        hi[t] = last + 1
    out = np.zeros((nx, npp), np.complex128)
    for i in prange(nx):
        for t in range(nt):
            d = xs[i] - mx[t]
            g = -d * d / kappa
            if g < -cut:
                continue
            f = amp[t] * np.exp(complex(g, dp[t] * d))
            for j in range(lo[t], hi[t]):
                out[i, j] += f * ptab[t, j]
    return out


def _term_grid_np(xs, ps, amp, mx, mp, dx, dp, kappa):
    d = xs[:, None] - mx[None, :]
    xtab = amp[None, :] * np.exp(-d * d / kappa + 1j * dp[None, :] * d)
    d = ps[None, :] - mp[:, None]
    ptab = np.exp(-d * d / kappa - 1j * dx[:, None] * d)
    return xtab @ ptab


def term_grid(xs, ps, amp, mx, mp, dx, dp, kappa):
    """Sum ``amp_t * X_t(x) * P_t(p)`` over terms on the grid ``xs`` x ``ps``.

    ``X_t(x) = exp(i dp_t (x - mx_t) - (x - mx_t)^2 / kappa)`` and
    ``P_t(p) = exp(-i dx_t (p - mp_t) - (p - mp_t)^2 / kappa)``.
    Returns a complex ``(len(xs), len(ps))`` array.
    """
    args = [np.ascontiguousarray(a, dtype=np.float64) for a in (xs, ps)]
    amp = np.ascontiguousarray(amp, dtype=np.complex128)
    rest = [np.ascontiguousarray(a, dtype=np.float64) for a in (mx, mp, dx, dp)]
    if amp.size == 0:
        return np.zeros((args[0].size, args[1].size), np.complex128)
    if use_numba():
        return _term_grid_nb(args[0], args[1], amp, *rest, float(kappa), GAUSS_CUT)
    return _term_grid_np(args[0], args[1], amp, *rest, float(kappa))


# --------------------------------------------------------------------------
# weighted sum of exp(quadratic pseudo-Boolean form) over the 2^m cube
# --------------------------------------------------------------------------
#
#   S = sum_y w(y) exp(E0 + sum_a L_a y_a + sum_{a<b} Q_ab y_a y_b)
#
# "subset" route: expand each factor exp(L y) = 1 + expm1(L) y and
# exp(Q y y') = 1 + expm1(Q) y y' in the idempotent monomial basis.  No
# O(1) quantities are ever subtracted, so sums whose value is many orders
# below the individual exponentials (tiny displacements) stay accurate.
# "direct" route: plain enumeration, accurate when the exponents are large.

@njit
def _cube_subset(e0, lv, qm1, omega, v):
    m = lv.size
    size = 1 << m
    v[0] = 1.0
    for a in range(1, size):
        low = a & (-a)
        idx = 0
        while (low >> idx) != 1:
            idx += 1
        v[a] = v[a ^ low] * np.expm1(lv[idx])
    for a in range(m):
        ba = 1 << a
        for b in range(a + 1, m):
            q = qm1[a, b]
            if q == 0:
                continue
            bb = 1 << b
            both = ba | bb
            for s in range(size - 1, -1, -1):
                if (s & both) == both:
                    v[s] += q * (v[s] + v[s ^ ba] + v[s ^ bb] + v[s ^ both])
    acc = 0j
    for s in range(size):
        acc += v[s] * omega[s]
    return np.exp(e0) * acc


@njit
def _cube_direct(e0, lv, qmat, wdir, v):
    m = lv.size
    size = 1 << m
    v[0] = 0.0
    acc = wdir[0] * np.exp(e0)
    for a in range(1, size):
        low = a & (-a)
        idx = 0
        while (low >> idx) != 1:
            idx += 1
        rest = a ^ low
        s = v[rest] + lv[idx]
        r = rest
        while r:
            lb = r & (-r)
            j = 0
            while (lb >> j) != 1:
                j += 1
            s += qmat[idx, j]
            r ^= lb
        v[a] = s
        acc += wdir[a] * np.exp(e0 + s)
    return acc


@njit
def _cube_sum(e0, lv, qm1, qmat, omega, wdir, route, lcap, v):
    # route: 1 subset, 2 direct, 0 auto (subset unless some |L| exceeds lcap)
    use_subset = route == 1
    if route == 0:
        use_subset = True
        for a in range(lv.size):
            if abs(lv[a]) > lcap:
                use_subset = False
                break
    if use_subset:
        return _cube_subset(e0, lv, qm1, omega, v)
    return _cube_direct(e0, lv, qmat, wdir, v)


@njit(parallel=True)
def _chain_points_nb(zr, zi, kappa, e0c, fp_re, fp_im, fm_re, fm_im,
                     bx_re, bx_im, bsgn, base, qm1, qmat, omega, wdir, route, lcap):
    npts = zr.size
    m = base.size
    out = np.empty(npts, np.complex128)
    for k in prange(npts):
        v = np.empty(1 << m, np.complex128)
        lv = np.empty(m, np.complex128)
        a = zr[k]
        b = zi[k]
        # Re/Im of x * conj(zeta) for the fixed-op sums
        re_p = fp_re * a + fp_im * b
        im_m = fm_im * a - fm_re * b
        e0 = e0c + complex(-2.0 * (a * a + b * b) / kappa + 2.0 * re_p / kappa,
                           2.0 * im_m)
        for j in range(m):
            re = bx_re[j] * a + bx_im[j] * b
            im = bx_im[j] * a - bx_re[j] * b
            lv[j] = base[j] + complex(2.0 * re / kappa, 2.0 * bsgn[j] * im)
        out[k] = _cube_sum(e0, lv, qm1, qmat, omega, wdir, route, lcap, v)
    return out


def _chain_points_np(zr, zi, kappa, e0c, fp_re, fp_im, fm_re, fm_im,
                     bx_re, bx_im, bsgn, base, qm1, qmat, omega, wdir, route, lcap):
    m = base.size
    size = 1 << m
    re_p = fp_re * zr + fp_im * zi
    im_m = fm_im * zr - fm_re * zi
    e0 = e0c + (-2.0 * (zr * zr + zi * zi) / kappa + 2.0 * re_p / kappa) + 2j * im_m
    re = bx_re[:, None] * zr[None, :] + bx_im[:, None] * zi[None, :]
    im = bx_im[:, None] * zr[None, :] - bx_re[:, None] * zi[None, :]
    lv = base[:, None] + 2.0 * re / kappa + 2j * bsgn[:, None] * im
    if route == 1:
        subset = np.ones(zr.size, bool)
    elif route == 2:
        subset = np.zeros(zr.size, bool)
    else:
        subset = np.all(np.abs(lv) <= lcap, axis=0)
    out = np.empty(zr.size, np.complex128)
    idx_of = np.zeros(size, np.int64)
    for s in range(1, size):
        low = s & (-s)
        idx_of[s] = low.bit_length() - 1

    if subset.any():
        sel = np.nonzero(subset)[0]
        ev = np.expm1(lv[:, sel])
        v = np.empty((size, sel.size), np.complex128)
        v[0] = 1.0
        for s in range(1, size):
            low = s & (-s)
            v[s] = v[s ^ low] * ev[idx_of[s]]
        states = np.arange(size)
        for a in range(m):
            ba = 1 << a
            for b in range(a + 1, m):
                q = qm1[a, b]
                if q == 0:
                    continue
                bb = 1 << b
                both = ba | bb
                # all targets contain both bits; sources never do, so one
                # vectorised update reproduces the sequential in-place sweep
                tgt = states[(states & both) == both]
                v[tgt] += q * (v[tgt] + v[tgt ^ ba] + v[tgt ^ bb] + v[tgt ^ both])
        out[sel] = np.exp(e0[sel]) * (omega @ v)
    if not subset.all():
        sel = np.nonzero(~subset)[0]
        lsel = lv[:, sel]
        expo = np.empty((size, sel.size), np.complex128)
        expo[0] = 0.0
        for s in range(1, size):
            low = s & (-s)
            idx = idx_of[s]
            rest = s ^ low
            acc = expo[rest] + lsel[idx]
            r = rest
            while r:
                lb = r & (-r)
                acc = acc + qmat[idx, lb.bit_length() - 1]
                r ^= lb
            expo[s] = acc
        out[sel] = wdir @ np.exp(e0[sel][None, :] + expo)
    return out


def chain_points(zr, zi, params, route=0, lcap=30.0):
    """Evaluate a factorised displacement chain at complex points ``zr + i zi``.

    ``params`` is the tuple produced by ``core.DisplacementChain._wigner_params``.
    """
    zr = np.ascontiguousarray(zr, dtype=np.float64).ravel()
    zi = np.ascontiguousarray(zi, dtype=np.float64).ravel()
    fn = _chain_points_nb if use_numba() else _chain_points_np
    return fn(zr, zi, *params, int(route), float(lcap))


def cube_sum(e0, lv, qmat, omega, wdir, route=0, lcap=30.0):
    """Scalar version of the cube sum (used for chain traces)."""
    lv = np.ascontiguousarray(lv, dtype=np.complex128)
    qmat = np.ascontiguousarray(qmat, dtype=np.complex128)
    with np.errstate(over="ignore", invalid="ignore"):
        qm1 = np.expm1(qmat)  # only read by the subset route, where |q| is small
    v = np.empty(1 << lv.size, np.complex128)
    if use_numba():
        return complex(_cube_sum(complex(e0), lv, qm1, qmat, omega, wdir, int(route), float(lcap), v))
    # the scalar numpy path reuses the vectorised one on a single point
    return complex(_cube_sum_py(complex(e0), lv, qm1, qmat, omega, wdir, int(route), float(lcap)))


def _cube_sum_py(e0, lv, qm1, qmat, omega, wdir, route, lcap):
    m = lv.size
    size = 1 << m
    subset = route == 1 or (route == 0 and np.all(np.abs(lv) <= lcap))
    if subset:
        v = np.empty(size, np.complex128)
        v[0] = 1.0
        for s in range(1, size):
            low = s & (-s)
            v[s] = v[s ^ low] * np.expm1(lv[low.bit_length() - 1])
        states = np.arange(size)
        for a in range(m):
            for b in range(a + 1, m):
                q = qm1[a, b]
                if q == 0:
                    continue
                ba, bb = 1 << a, 1 << b
                both = ba | bb
                tgt = states[(states & both) == both]
                v[tgt] += q * (v[tgt] + v[tgt ^ ba] + v[tgt ^ bb] + v[tgt ^ both])
        return np.exp(e0) * np.dot(omega, v)
    expo = np.zeros(size, np.complex128)
    for s in range(1, size):
        low = s & (-s)
        idx = low.bit_length() - 1
        rest = s ^ low
        acc = expo[rest] + lv[idx]
        r = rest
        while r:
            lb = r & (-r)
            acc += qmat[idx, lb.bit_length() - 1]
            r ^= lb
        expo[s] = acc
    return np.dot(wdir, np.exp(e0 + expo))


# --------------------------------------------------------------------------
# Wigner function of a number-basis density matrix
# --------------------------------------------------------------------------
#
#   W = (1/pi) [ sum_n rho_nn (-1)^n l_n^0(x)
#                + 2 Re sum_k e^{ik arg a} sum_n rho_{n,n+k} (-1)^n l_n^k(x) ],
#
# x = 4|a|^2, with l_n^k the normalised associated Laguerre functions
# sqrt(n!/(n+k)!) x^{k/2} e^{-x/2} L_n^k(x), |l| <= 1.  They are generated by
# a forward recurrence in n, which runs in the stable direction both inside
# and outside the oscillatory region; a running log-scale keeps the starting
# values from underflowing at large x.

_BIG = 1e150
_LOGBIG = 345.38776394910684


@njit
def _fock_point(rho, zr, zi):
    n = rho.shape[0]
    x = 4.0 * (zr * zr + zi * zi)
    theta = np.arctan2(zi, zr)
    logx = np.log(x) if x > 0 else -np.inf
    acc = 0.0
    for k in range(n):
        if x == 0.0 and k > 0:
            break
        if k == 0:
            e = -0.5 * x
        else:
            e = 0.5 * k * logx - 0.5 * x - 0.5 * math.lgamma(k + 1.0)
        prev = 0.0
        cur = 1.0
        s_re = 0.0
        s_im = 0.0
        sign = 1.0
        for j in range(n - k):
            if e > -700.0:
                val = cur * np.exp(e)
                r = rho[j, j + k]
                s_re += sign * val * r.real
                s_im += sign * val * r.imag
            # l_{j+1} from l_j, l_{j-1}
            nxt = ((2.0 * j + 1.0 + k - x) * cur - np.sqrt(j * (j + k)) * prev) / np.sqrt((j + 1.0) * (j + k + 1.0))
            prev = cur
            cur = nxt
            sign = -sign
            a = abs(cur)
            if a > _BIG:
                prev /= _BIG
                cur /= _BIG
                e += _LOGBIG
        if k == 0:
            acc += s_re
        else:
            c = np.cos(k * theta)
            sn = np.sin(k * theta)
            acc += 2.0 * (c * s_re - sn * s_im)
    return acc / np.pi


@njit(parallel=True)
def _fock_wigner_nb(rho, zr, zi):
    out = np.empty(zr.size)
    for k in prange(zr.size):
        out[k] = _fock_point(rho, zr[k], zi[k])
    return out


def _fock_wigner_np(rho, zr, zi):
    from scipy.special import gammaln

    n = rho.shape[0]
    x = 4.0 * (zr * zr + zi * zi)
    theta = np.arctan2(zi, zr)
    with np.errstate(divide="ignore"):
        logx = np.log(x)
    acc = np.zeros(zr.size)
    for k in range(n):
        if k == 0:
            e = -0.5 * x
        else:
            e = np.where(x > 0, 0.5 * k * logx - 0.5 * x - 0.5 * gammaln(k + 1.0), -np.inf)
        prev = np.zeros(zr.size)
        cur = np.ones(zr.size)
        s = np.zeros(zr.size, np.complex128)
        sign = 1.0
        for j in range(n - k):
            live = e > -700.0
            val = np.where(live, cur * np.exp(np.where(live, e, 0.0)), 0.0)
            s += sign * val * rho[j, j + k]
            nxt = ((2.0 * j + 1.0 + k - x) * cur - np.sqrt(j * (j + k)) * prev) / np.sqrt((j + 1.0) * (j + k + 1.0))
            prev, cur = cur, nxt
            sign = -sign
            big = np.abs(cur) > _BIG
            if big.any():
                prev = np.where(big, prev / _BIG, prev)
                cur = np.where(big, cur / _BIG, cur)
                e = np.where(big, e + _LOGBIG, e)
        if k == 0:
            acc += s.real
        else:
            acc += 2.0 * (np.cos(k * theta) * s.real - np.sin(k * theta) * s.imag)
    return acc / np.pi


def fock_wigner_points(rho, zr, zi):
    """Wigner function of ``rho`` at ``zeta = zr + i zi`` (``zeta = (x + ip)/sqrt 2``)."""
    rho = np.ascontiguousarray(rho, dtype=np.complex128)
    zr = np.ascontiguousarray(zr, dtype=np.float64).ravel()
    zi = np.ascontiguousarray(zi, dtype=np.float64).ravel()
    if use_numba():
        return _fock_wigner_nb(rho, zr, zi)
    return _fock_wigner_np(rho, zr, zi)
