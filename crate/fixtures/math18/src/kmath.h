#ifndef KMATH_H
#define KMATH_H

struct recip {
    unsigned int m;
    unsigned char sh1;
    unsigned char sh2;
};

unsigned long long int_pow(unsigned long long base, unsigned int exp);
unsigned long int_sqrt(unsigned long x);
unsigned long gcd(unsigned long a, unsigned long b);
unsigned long lcm(unsigned long a, unsigned long b);
unsigned long lcm_not_zero(unsigned long a, unsigned long b);
int fls_u32(unsigned int x);

#endif
