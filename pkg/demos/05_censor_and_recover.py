"""Censor-and-recover validation of the gap-bridging mechanism.

Starting from a completely reported cohort, a random fraction of interior
days is hidden, each model is fitted on the censored series, and the hidden
days are reconstructed by running the model forward from the last report
before each gap. The score is the mean absolute error on the hidden days.
The increment model bridges gaps natively; the benchmark models compound
their own one-step rules, which is exactly where they fall apart as the
censoring rate grows.
"""

from gapfit import (FitConfig, MissingnessSpec, SimSpec, censor_sweep,
                    simulate_cohort)


def main():
    spec = SimSpec(n_hospitals=80, n_days=70, noise_scale=0.4,
                   missingness=MissingnessSpec(mcar_rate=0.0,
                                               gap_start_prob=0.0),
                   seed=17)
    cohort, _ = simulate_cohort(spec)
    config = FitConfig(steps=1200, auto_eta=True, eta_safety=0.05,
                       warm_start=True, incidence_scale=spec.incidence_scale)
    rates = [0.10, 0.25, 0.50, 0.75]
    reports = censor_sweep(cohort, rates, repetitions=5, seed=23,
                           config=config)

    models = list(reports[0].summary)
    print(f"{len(cohort)} hospitals, {spec.n_days} days, "
          f"{reports[0].repetitions} repetitions per rate")
    print()
    print("median absolute error on the hidden days")
    print(f"{'model':<16}" + "".join(f"{r:>10.0%}" for r in rates))
    for m in models:
        row = "".join(f"{rep.summary[m]['median']:>10.3f}" for rep in reports)
        print(f"{m:<16}" + row)
    n_flags = sum(len(rep.flags) for rep in reports)
    if n_flags:
        print(f"\n{n_flags} fits fell back to the mean model")


if __name__ == "__main__":
    main()
