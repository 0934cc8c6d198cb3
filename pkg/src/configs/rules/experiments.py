desk = {
    "name": "desk",
    "realizations": 2_000,
    "samples": 10_000,
    "max_sweeps": 1_000_000,
    "theta": 0.005,
    "n_c": 0.0,
    "nu": 1.69,
    "beta": 3.4,
    "delta": 0.13,
    "pool_sizes": [2**10, 2**11, 2**12, 2**13, 2**14],
    "annealed_pool_sizes": [2**10, 2**11, 2**12, 2**13, 2**14, 2**15, 2**16],
}

full = {
    **desk,
    "name": "full",
    "realizations": 20_000,
    "pool_sizes": [2**k for k in range(10, 19)],
}


presets_dict = {
    "desk": desk,
    "full": full,
}
