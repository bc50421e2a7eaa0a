#include "kmath.h"

unsigned long long int_pow(unsigned long long base, unsigned int exp)
{
    unsigned long long result = 1;

    while (exp) {
        if (exp & 1)
            result *= base;
        exp >>= 1;
        base *= base;
    }
    return result;
}

unsigned long int_sqrt(unsigned long x)
{
    unsigned long b, m, y = 0;

    if (x <= 1)
        return x;
    m = 1UL << 30;
    while (m > x)
        m >>= 2;
    while (m != 0) {
        b = y + m;
        y >>= 1;
        if (x >= b) {
            x -= b;
            y += m;
        }
        m >>= 2;
    }
    return y;
}

unsigned long gcd(unsigned long a, unsigned long b)
{
    unsigned long r;

    if (a < b) {
        r = a;
        a = b;
        b = r;
    }
    while (b != 0) {
        r = a % b;
        a = b;
        b = r;
    }
    return a;
}

unsigned long lcm(unsigned long a, unsigned long b)
{
    if (a && b)
        return (a / gcd(a, b)) * b;
    return 0;
}

unsigned long lcm_not_zero(unsigned long a, unsigned long b)
{
    unsigned long l = lcm(a, b);

    if (l)
        return l;
    return b ? b : a;
}

unsigned long abs_diff(unsigned long a, unsigned long b)
{
    if (a > b)
        return a - b;
    return b - a;
}

int is_prime(unsigned int n)
{
    unsigned int d;

    if (n < 2)
        return 0;
    for (d = 2; d * d <= n; d++) {
        if (n % d == 0)
            return 0;
    }
    return 1;
}
