static int scale(int x)
{
    return x * 3;
}

int use_b(int x)
{
    return scale(x) - 1;
}
