"""
Layer Sparsity Simulation Runner
Run the LS / SLS / ILS / FLS comparison on a small grid and print the summary.

Usage:
    python layer_sparsity_runner.py

This will:
1. Draw data sets from random layer-sparse ReLU networks
2. Fit plain, layer-regularized, oracle and refitted estimators
3. Print median (and third quartile) test error and active hidden layers
"""

import logging
import time

from core.experiment import Setting, emit_table, run_experiment

# ═══════════════════════════════════════════════════════════════
# CONFIGURATION - Modify these settings
# ═══════════════════════════════════════════════════════════════

MASTER_SEED = 3

# Runs per setting (30 for the full study)
N_RUNS = 5

# (hidden layers, s_W) pairs to simulate
SETTINGS = [
    Setting(hidden_layers=10, s_w=0.1),
    Setting(hidden_layers=10, s_w=0.3),
]

# Optional hyperparameter overrides, e.g. {"epochs": 50, "mode": "sound"}
OVERRIDES = {}

# Process pool size (1 = serial)
WORKERS = 1

# "table" for aligned text, "csv" for machine output
OUTPUT_FORMAT = "table"

# ═══════════════════════════════════════════════════════════════
# END OF CONFIGURATION
# ═══════════════════════════════════════════════════════════════


def main():
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    print("🚀 Layer sparsity simulation")
    print(f"🎲 Master seed: {MASTER_SEED}")
    print(f"📊 Settings: {', '.join(s.label for s in SETTINGS)} ({N_RUNS} runs each)\n")

    started = time.perf_counter()
    aggregates = run_experiment(
        SETTINGS, n_runs=N_RUNS, master_seed=MASTER_SEED, overrides=OVERRIDES, workers=WORKERS
    )
    elapsed = time.perf_counter() - started

    print(f"\n{'='*60}")
    print("📈 RESULTS (median / third quartile)")
    print(f"{'='*60}\n")
    print(emit_table(aggregates, OUTPUT_FORMAT))

    failed = sum(a.failed for a in aggregates)
    if failed:
        print(f"⚠️  {failed} fits diverged and were left out of the summaries")
    else:
        print("✅ All fits converged")
    print(f"⏱️  Finished in {elapsed:.1f}s")


if __name__ == "__main__":
    main()
