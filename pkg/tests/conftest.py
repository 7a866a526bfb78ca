"""Prints a one-line verdict per acceptance criterion after the run."""

CRITERIA = {
    "test_criterion_01_layer_gradients":
        "criterion 1: all layer gradients match finite differences (<1e-4, 10 seeds, <30s)",
    "test_criterion_02_metric_oracles":
        "criterion 2: MAE/RMSE closed-form oracles, RMSE>=MAE fuzz, baseline MAE 0.25+-0.01",
    "test_criterion_03_fiducial_layout":
        "criterion 3: fiducial latent follows the 90 -> 128 zero-padded layout under fuzzing",
    "test_criterion_04_noiseless_learnability":
        "criterion 4: noiseless fiducial run beats baseline on all 6, heading MAE < 0.05, <5min",
    "test_criterion_05_all_pipelines_beat_baseline":
        "criterion 5: all five pipelines beat baseline MSE on >=4 of 6 components",
    "test_criterion_06_reductor_ablation":
        "criterion 6: tuned reductor beats untrained random projection on 3 seeds",
    "test_criterion_07_flicker_reproduction":
        "criterion 7: zero-marker frames collapse toward the training-mean configuration",
    "test_criterion_08_camera_asymmetry":
        "criterion 8: side preset sees more markers than the front preset",
    "test_criterion_09_vae_training":
        "criterion 9: 300-epoch VAE halves held-out reconstruction MSE, KL>=0, <10min",
    "test_criterion_10_reproducibility":
        "criterion 10: repeated gen/train/eval runs emit byte-identical metric CSVs",
    "test_criterion_11_protocol_enforcement":
        "criterion 11: CLI rejects split cross-use; generated splits are trajectory-disjoint",
}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    verdicts = {}
    for status, mark in (("passed", "PASS"), ("failed", "FAIL"), ("error", "FAIL"),
                         ("skipped", "SKIP")):
        for rep in terminalreporter.stats.get(status, []):
            name = getattr(rep, "location", ("", "", ""))[2].split("[")[0]
            if name in CRITERIA:
                verdicts[name] = mark
    if verdicts:
        terminalreporter.section("acceptance criteria")
        for name in sorted(CRITERIA):
            if name in verdicts:
                terminalreporter.write_line(f"{verdicts[name]}  {CRITERIA[name]}")
