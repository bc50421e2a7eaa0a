pub type table_t = table;

pub static mut call_count: i32 = 0 as i32;

pub const LIMIT: i32 = 64;

#[repr(C)]
#[derive(Clone, Copy)]
pub struct table {
    pub items: [i32; 16],
    pub len: u32,
}

pub fn is_odd(n: u32) -> i32 {
    if n == 0 {
        return 0;
    }
    is_even(n - 1)
}

pub fn is_even(n: u32) -> i32 {
    if n == 0 {
        return 1;
    }
    is_odd(n - 1)
}

pub fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

pub fn lcm(a: u32, b: u32) -> u32 {
    if a == 0 || b == 0 {
        return 0;
    }
    a / gcd(a, b) * b
}

pub fn classify(mut code: i32) -> i32 {
    unsafe {
        's1: {
            match code {
                0 => {
                    return 10;
                }
                1 | 2 => {
                    return 20;
                }
                _ => {
                }
            }
        }
        return -1;
    }
}

pub fn digit_sum(n: i32) -> i32 {
    let mut s = 0;
    let mut n = if n < 0 { -n } else { n };
    loop {
        s += n % 10;
        n /= 10;
        if n <= 0 {
            break;
        }
    }
    s
}

pub fn clamp(v: i32, lo: i32, hi: i32) -> i32 {
    if v < lo {
        return lo;
    }
    if v > hi {
        return hi;
    }
    v
}

pub fn get(t: &table_t, i: u32) -> i32 {
    unsafe {
        call_count += 1;
    }
    if i >= t.len {
        return 0;
    }
    clamp(t.items[i as usize], -LIMIT, LIMIT)
}

pub fn sum(t: &table_t) -> i64 {
    let mut total: i64 = 0;
    for i in 0..t.len {
        total += get(t, i) as i64;
    }
    total
}

pub fn max(t: &table_t) -> i32 {
    let mut best = get(t, 0);
    let mut i = 1;
    while i < t.len {
        let v = get(t, i);
        if v > best {
            best = v;
        }
        i += 1;
    }
    best
}

pub fn stats(t: &table_t, out_max: Option<&mut i32>) -> i64 {
    if let Some(m) = out_max {
        *m = max(t);
    }
    sum(t)
}
