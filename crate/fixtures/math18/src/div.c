#include "kmath.h"

unsigned long div_round_up(unsigned long n, unsigned long d)
{
    return (n + d - 1) / d;
}

long div_round_closest(long x, long d)
{
    if ((x > 0) == (d > 0))
        return (x + d / 2) / d;
    return (x - d / 2) / d;
}

unsigned long mult_frac(unsigned long x, unsigned long n, unsigned long d)
{
    unsigned long q = x / d;
    unsigned long r = x % d;

    return q * n + r * n / d;
}

int clamp_val(int v, int lo, int hi)
{
    if (v < lo)
        return lo;
    if (v > hi)
        return hi;
    return v;
}

struct recip reciprocal_value(unsigned int d)
{
    struct recip R;
    unsigned long long m;
    int l;

    l = fls_u32(d - 1);
    m = ((1ULL << 32) * ((1ULL << l) - d));
    m /= d;
    ++m;
    R.m = (unsigned int)m;
    R.sh1 = l > 1 ? 1 : l;
    R.sh2 = l - 1 > 0 ? l - 1 : 0;
    return R;
}

unsigned int reciprocal_divide(unsigned int a, struct recip R)
{
    unsigned int t = (unsigned int)(((unsigned long long)a * R.m) >> 32);

    return (t + ((a - t) >> R.sh1)) >> R.sh2;
}

void rational_best_approximation(unsigned long given_numerator, unsigned long given_denominator,
                                 unsigned long max_numerator, unsigned long max_denominator,
                                 unsigned long *best_numerator, unsigned long *best_denominator)
{
    unsigned long n, d, n0, d0, n1, d1, n2, d2;

    n = given_numerator;
    d = given_denominator;
    n0 = d1 = 0;
    n1 = d0 = 1;
    for (;;) {
        unsigned long dp, a;

        if (d == 0)
            break;
        dp = d;
        a = n / d;
        d = n % d;
        n = dp;
        n2 = n0 + a * n1;
        d2 = d0 + a * d1;
        if (n2 > max_numerator || d2 > max_denominator)
            break;
        n0 = n1;
        n1 = n2;
        d0 = d1;
        d1 = d2;
    }
    *best_numerator = n1;
    *best_denominator = d1;
}
