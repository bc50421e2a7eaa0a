static int scale(int x)
{
    return x * 2;
}

int use_a(int x)
{
    return scale(x) + 1;
}
