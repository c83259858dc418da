"""Database connection and session management for stored sweeps."""

import hashlib
import json
import math

import numpy as np
from sqlalchemy import create_engine
from sqlalchemy.dialects import postgresql, sqlite
from sqlalchemy.orm import sessionmaker
from sqlalchemy.sql import func

from src.config import get_database_url
from src.sweep import ColumnResult
from src.tables import Base, SweepCell, SweepRun

engine = create_engine(get_database_url())
SessionLocal = sessionmaker(bind=engine)


def init_db(bind=None):
    """Create all database tables."""
    Base.metadata.create_all(bind=bind or engine)


def get_db():
    """Get a database session (context manager)."""
    db = SessionLocal()
    try:
        yield db
    finally:
        db.close()


def config_hash(config: dict) -> str:
    """Stable hash of the settings that determine a sweep's cell values."""
    payload = json.dumps(config, sort_keys=True, default=str)
    return hashlib.sha256(payload.encode()).hexdigest()


def get_or_create_run(session, graph: str, config: dict) -> SweepRun:
    """
    Find the stored run with the same sweep settings, or create it.

    Args:
        session: SQLAlchemy session
        graph: Topology name
        config: Settings that determine cell values (grid, sync, seeds, model, ...)

    Returns:
        SweepRun: The existing or newly inserted run
    """
    digest = config_hash(config)
    run = session.query(SweepRun).filter_by(config_hash=digest).first()
    if run:
        return run

    run = SweepRun(graph=graph, config_hash=digest, config_json=json.dumps(config, sort_keys=True, default=str))
    session.add(run)
    session.commit()
    session.refresh(run)
    return run


def _finite_or_none(value):
    value = float(value)
    return value if math.isfinite(value) else None


def _insert_for(session):
    """Dialect-specific INSERT supporting ON CONFLICT."""
    if session.get_bind().dialect.name == 'postgresql':
        return postgresql.insert
    return sqlite.insert


def upsert_cell(session, run_id: int, cell: dict) -> str:
    """
    Insert or update one sweep cell.

    If a cell with the same (run_id, gamma_index, tau_index) exists it is
    updated only when its verdict, divergence flag or error changed.

    Args:
        session: SQLAlchemy session
        run_id: Owning SweepRun id
        cell: Dict with gamma_index, tau_index, gamma, tau, synchronized,
            diverged, max_error

    Returns:
        str: 'inserted' | 'updated' | 'unchanged'
    """
    values = {
        'run_id': run_id,
        'gamma_index': int(cell['gamma_index']),
        'tau_index': int(cell['tau_index']),
        'gamma': float(cell['gamma']),
        'tau': float(cell['tau']),
        'synchronized': bool(cell['synchronized']),
        'diverged': bool(cell['diverged']),
        'max_error': _finite_or_none(cell['max_error']),
    }

    existing = session.query(SweepCell).filter_by(
        run_id=run_id, gamma_index=values['gamma_index'], tau_index=values['tau_index']
    ).first()

    if existing:
        if (existing.synchronized == values['synchronized']
                and existing.diverged == values['diverged']
                and existing.max_error == values['max_error']):
            return 'unchanged'
        existing.synchronized = values['synchronized']
        existing.diverged = values['diverged']
        existing.max_error = values['max_error']
        existing.updated_at = func.now()
        return 'updated'

    stmt = _insert_for(session)(SweepCell).values(**values)

    # Handle a concurrent writer with ON CONFLICT
    stmt = stmt.on_conflict_do_update(
        index_elements=['run_id', 'gamma_index', 'tau_index'],
        set_={
            'synchronized': stmt.excluded.synchronized,
            'diverged': stmt.excluded.diverged,
            'max_error': stmt.excluded.max_error,
            'updated_at': func.now(),
        },
    )
    session.execute(stmt)
    return 'inserted'


def upsert_cells(session, run_id: int, cells: list[dict]) -> dict:
    """
    Batch upsert sweep cells in one transaction.

    Returns:
        dict: {'inserted': int, 'updated': int, 'unchanged': int}
    """
    results = {'inserted': 0, 'updated': 0, 'unchanged': 0}

    for cell in cells:
        results[upsert_cell(session, run_id, cell)] += 1

    session.commit()
    return results


def column_cells(grid, tau_index: int, column) -> list[dict]:
    """Cell dicts of one tau column, ready for upsert_cells."""
    tau = grid.tau_values[tau_index]
    return [
        {
            'gamma_index': i,
            'tau_index': tau_index,
            'gamma': gamma,
            'tau': tau,
            'synchronized': column.synchronized[i],
            'diverged': column.diverged[i],
            'max_error': column.max_error[i],
        }
        for i, gamma in enumerate(grid.gamma_values)
    ]


def get_completed_taus(session, run_id: int, n_gammas: int) -> set[int]:
    """
    Tau indices whose column is fully stored for a run.

    Args:
        session: SQLAlchemy session
        run_id: SweepRun id
        n_gammas: Cells per complete column

    Returns:
        set: Complete tau indices
    """
    rows = (
        session.query(SweepCell.tau_index, func.count(SweepCell.id))
        .filter(SweepCell.run_id == run_id)
        .group_by(SweepCell.tau_index)
        .all()
    )
    return {tau_index for tau_index, count in rows if count >= n_gammas}


def load_columns(session, run_id: int, grid, tau_indices) -> dict:
    """Stored columns as {tau_index: ColumnResult}; missing errors read back as inf."""
    columns = {}
    n_gammas = len(grid.gamma_values)
    for tau_index in sorted(tau_indices):
        cells = (
            session.query(SweepCell)
            .filter_by(run_id=run_id, tau_index=tau_index)
            .order_by(SweepCell.gamma_index)
            .all()
        )
        if len(cells) != n_gammas:
            continue
        columns[tau_index] = ColumnResult(
            synchronized=np.array([c.synchronized for c in cells], dtype=bool),
            diverged=np.array([c.diverged for c in cells], dtype=bool),
            max_error=np.array(
                [c.max_error if c.max_error is not None else np.inf for c in cells], dtype=float
            ),
        )
    return columns
