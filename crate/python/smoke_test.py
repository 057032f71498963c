"""Quick check that the extension imports and recovers a planted effect.

Build and install first:
    maturin build --release -m crates/python/Cargo.toml -o target/wheels
    pip install target/wheels/matchcause-*.whl
"""

import math

import matchcause as mc


def main():
    study = mc.generate_study(
        4000, 5.0, seed=1, n_confounders=8,
        gamma=[1.0] + [0.3] * 7, delta=[1.0] + [0.0] * 7,
    )
    print(study)
    assert abs(study.naive_difference - 5.0) > 0.3

    res = mc.analyze(study.x, study.covariate_names, study.treatment, study.outcomes, permutations=199)
    print(res)
    assert abs(res.effect - 5.0) < 0.5, res.effect
    assert res.p_value < 0.05
    assert all(abs(after) < 0.1 for _, _, after in res.balance)

    assert mc.standardized_mean_difference([0, 1, 2], [-1, 0, 1]) == 1.0
    assert mc.auc([0.1, 0.4, 0.35, 0.8], [False, False, True, True]) == 0.75
    z = mc.sobel_z(0.5, 0.4, 0.1, 0.05)
    assert math.isclose(z, 0.2 / math.sqrt(0.002225), rel_tol=1e-12)
    assert mc.tokenize("Can't stop!")[0].lower().startswith("can")

    try:
        mc.analyze([[1.0]], ["x"], [True], [1.0], statistic="bogus")
    except ValueError as e:
        print("rejected:", e)
    else:
        raise AssertionError("bad statistic accepted")
    print("ok")


if __name__ == "__main__":
    main()
