#include "stats.h"

int is_odd(unsigned int n);

int is_even(unsigned int n)
{
    if (n == 0)
        return 1;
    return is_odd(n - 1);
}

int is_odd(unsigned int n)
{
    if (n == 0)
        return 0;
    return is_even(n - 1);
}

unsigned int gcd(unsigned int a, unsigned int b)
{
    while (b != 0) {
        unsigned int t = a % b;
        a = b;
        b = t;
    }
    return a;
}

unsigned int lcm(unsigned int a, unsigned int b)
{
    if (a == 0 || b == 0)
        return 0;
    return a / gcd(a, b) * b;
}

int classify(int code)
{
    switch (code) {
    case 0:
        return 10;
    case 1:
    case 2:
        return 20;
    default:
        break;
    }
    return -1;
}

int digit_sum(int n)
{
    int s = 0;
    if (n < 0)
        n = -n;
    do {
        s += n % 10;
        n /= 10;
    } while (n > 0);
    return s;
}
