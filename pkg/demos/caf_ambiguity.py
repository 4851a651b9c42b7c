"""Three interleaved NC-OFDM configurations produce the same CAF peak lags.

Run: python demos/caf_ambiguity.py
"""

from physpoof import cyclo


def main():
    for case in (1, 2, 3):
        T_u, q = cyclo.TABLE1_CASES[case]
        grid = cyclo.table1_case_caf(case, snr_db=5.0, M=50_000, max_lag=400, seed=case)
        peaks = cyclo.caf_peaks(grid, 0.3)
        amb = cyclo.ambiguity_set(peaks, cyclo.table1_candidates(), grid.T_s)
        print(f"case {case}: T_u={T_u * 1e6:.0f}us q={q} peak lags {peaks.tolist()} "
              f"spacing {cyclo.peak_spacing(peaks) * grid.T_s * 1e6:.0f}us "
              f"consistent candidates {len(amb)}")


if __name__ == "__main__":
    main()
