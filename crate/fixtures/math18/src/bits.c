#include "kmath.h"

int fls_u32(unsigned int x)
{
    int r = 32;

    if (!x)
        return 0;
    if (!(x & 0xffff0000u)) {
        x <<= 16;
        r -= 16;
    }
    if (!(x & 0xff000000u)) {
        x <<= 8;
        r -= 8;
    }
    if (!(x & 0xf0000000u)) {
        x <<= 4;
        r -= 4;
    }
    if (!(x & 0xc0000000u)) {
        x <<= 2;
        r -= 2;
    }
    if (!(x & 0x80000000u)) {
        r -= 1;
    }
    return r;
}

int is_power_of_2(unsigned long n)
{
    return n != 0 && (n & (n - 1)) == 0;
}

int ilog2_u32(unsigned int x)
{
    return fls_u32(x) - 1;
}

unsigned int roundup_pow_of_two(unsigned int n)
{
    if (n <= 1)
        return 1;
    return 1u << fls_u32(n - 1);
}
