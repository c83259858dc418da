"""Export stored sweeps to Parquet files for sharing and notebook analysis."""

from pathlib import Path

import pandas as pd
from sqlalchemy import create_engine, text

from src.config import get_database_url

DATA_DIR = Path(__file__).resolve().parent.parent / "data"


def export():
    DATA_DIR.mkdir(exist_ok=True)
    engine = create_engine(get_database_url())

    runs_df = pd.read_sql(
        text("""
            SELECT
                r.id,
                r.graph,
                r.config_hash,
                r.config_json,
                r.created_at,
                COUNT(c.id) AS cells,
                SUM(CASE WHEN c.synchronized THEN 1 ELSE 0 END) AS synchronized_cells,
                SUM(CASE WHEN c.diverged THEN 1 ELSE 0 END) AS diverged_cells
            FROM sweep_runs r
            LEFT JOIN sweep_cells c ON c.run_id = r.id
            GROUP BY r.id
            ORDER BY r.id
        """),
        engine,
    )
    runs_df.to_parquet(DATA_DIR / "sweep_runs.parquet", index=False)
    print(f"Exported {len(runs_df)} sweep runs")

    cells_df = pd.read_sql(
        text("""
            SELECT
                c.run_id,
                r.graph,
                c.gamma,
                c.tau,
                c.synchronized,
                c.diverged,
                c.max_error
            FROM sweep_cells c
            JOIN sweep_runs r ON r.id = c.run_id
            ORDER BY c.run_id, c.gamma_index, c.tau_index
        """),
        engine,
    )
    cells_df.to_parquet(DATA_DIR / "sweep_cells.parquet", index=False)
    print(f"Exported {len(cells_df)} sweep cells")


if __name__ == "__main__":
    export()
