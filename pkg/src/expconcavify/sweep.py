"""The expert-advice sweep: every substitution, learning rate, outcome bias and expert setting.

Outcome sequences are shared by all cells with the same p, so substitutions are compared on
identical games. Seeds come from the master seed and p alone, which keeps each cell
reproducible on its own.
"""
import os
from concurrent.futures import ThreadPoolExecutor, as_completed

import numpy as np
from loguru import logger
from tqdm import tqdm

from expconcavify import settings
from expconcavify.engine.game import GameConfig, as_composite, run_game
from expconcavify.engine.substitution import SUBSTITUTIONS
from expconcavify.losses.catalog import catalog_loss
from expconcavify.processors.schemas import SweepCell
from expconcavify.processors.trace_transformer import Transformer
from expconcavify.providers.experts import ExpertSettingSpec, build_experts
from expconcavify.providers.outcomes import OutcomeSpec, generate_outcomes
from expconcavify.storage.csv_handler import CsvHandler
from expconcavify.storage.manifest_handler import ManifestHandler

ETAS = (0.1, 0.3, 0.5)
PS = (0.5, 0.7, 0.9, 1.0)
SETTINGS = (1, 2, 3)
HORIZON = 100
SWEEP_LOSS = "square_scalar"
MANIFEST_NAME = "manifest.csv"
EXPERT_COUNTS = {1: 2, 2: 3, 3: 101}


def outcome_seed(master_seed, p):
    return int(np.random.SeedSequence([int(master_seed), int(round(p * 1000))]).generate_state(1)[0])


def sweep_cells(etas=ETAS, ps=PS, setting_ids=SETTINGS, substitutions=SUBSTITUTIONS, T=HORIZON, master_seed=0):
    cells = []
    for substitution in substitutions:
        for eta in etas:
            for p in ps:
                for setting in setting_ids:
                    cells.append(SweepCell(
                        order=len(cells), eta=eta, p=p, setting=setting, substitution=substitution,
                        T=T, seed=outcome_seed(master_seed, p),
                    ))
    return cells


def run_cell(cell, composite, outcomes, csv_handler, transform):
    config = GameConfig.create(composite, algorithm="AA", substitution=cell.substitution, eta=cell.eta)
    pool = build_experts(ExpertSettingSpec.numbered(cell.setting), outcomes)
    trace = run_game(config, pool, outcomes)
    path = csv_handler.write_trace(trace, transform.cell_slug(cell))
    return transform.prepare_manifest_payload(cell, trace, path)


def sweep_appendix_a(etas=ETAS, ps=PS, setting_ids=SETTINGS, substitutions=SUBSTITUTIONS, out_dir=None,
                     T=HORIZON, master_seed=None, max_workers=None):
    """Runs every cell, writes one trace CSV per cell and returns the manifest path."""
    out_dir = out_dir or settings.output_dir()
    master_seed = settings.master_seed() if master_seed is None else master_seed
    max_workers = max_workers or settings.max_workers()

    cells = sweep_cells(etas, ps, setting_ids, substitutions, T, master_seed)
    outcomes = {p: generate_outcomes(OutcomeSpec(kind="bernoulli", p=p, T=T, seed=outcome_seed(master_seed, p))) for p in ps}
    composite = as_composite(catalog_loss(SWEEP_LOSS))
    csv_handler = CsvHandler(out_dir)
    transform = Transformer()
    manifest = ManifestHandler(os.path.join(out_dir, MANIFEST_NAME))
    manifest.reset()

    logger.info(f"Starting sweep: {len(cells)} cells into {out_dir}")
    pbar = tqdm(total=len(cells), desc="Sweeping cells", unit="cell")
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        future_to_cell = {
            executor.submit(run_cell, cell, composite, outcomes[cell.p], csv_handler, transform): cell
            for cell in cells
        }
        for future in as_completed(future_to_cell):
            cell = future_to_cell[future]
            try:
                manifest.add_row(future.result())
            except Exception as e:
                logger.error(f"Cell {cell.order} ({cell.title}) failed: {e}")
                manifest.add_row(transform.prepare_failure_payload(cell, EXPERT_COUNTS[cell.setting], e))
            finally:
                pbar.update(1)
    pbar.close()

    path = manifest.write()
    failed = sum(row.status != "ok" for row in manifest.rows)
    ManifestHandler.close(manifest.path)
    if failed:
        logger.warning(f"{failed} of {len(cells)} sweep cells failed")
    logger.success(f"Sweep complete: {len(cells)} cells, manifest at {path}")
    return path
