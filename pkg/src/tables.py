"""SQLAlchemy tables for stored sweeps."""

from sqlalchemy import (
    Column, Integer, String, DateTime, Index, UniqueConstraint,
    ForeignKey, Float, Boolean, Text
)
from sqlalchemy.orm import declarative_base, relationship
from sqlalchemy.sql import func

Base = declarative_base()


class SweepRun(Base):
    """One sweep configuration (graph, grid, sync settings, seeds)."""

    __tablename__ = 'sweep_runs'

    id = Column(Integer, primary_key=True)
    graph = Column(String(64), nullable=False, index=True)
    config_hash = Column(String(64), nullable=False, unique=True)
    config_json = Column(Text, nullable=False)
    created_at = Column(DateTime(timezone=True), server_default=func.now())
    updated_at = Column(DateTime(timezone=True), server_default=func.now(), onupdate=func.now())

    cells = relationship("SweepCell", back_populates="run", cascade="all, delete-orphan")

    def __repr__(self):
        return f"<SweepRun(id={self.id}, graph={self.graph}, hash={self.config_hash[:8]})>"


class SweepCell(Base):
    """Verdict of a single (gamma, tau) cell."""

    __tablename__ = 'sweep_cells'

    id = Column(Integer, primary_key=True)
    run_id = Column(Integer, ForeignKey('sweep_runs.id', ondelete='CASCADE'), nullable=False, index=True)
    gamma_index = Column(Integer, nullable=False)
    tau_index = Column(Integer, nullable=False)
    gamma = Column(Float, nullable=False)
    tau = Column(Float, nullable=False)
    synchronized = Column(Boolean, nullable=False)
    diverged = Column(Boolean, nullable=False, default=False)
    max_error = Column(Float, nullable=True)
    updated_at = Column(DateTime(timezone=True), server_default=func.now(), onupdate=func.now())

    run = relationship("SweepRun", back_populates="cells")

    __table_args__ = (
        UniqueConstraint('run_id', 'gamma_index', 'tau_index', name='uix_run_cell'),
        Index('ix_cells_run_tau', 'run_id', 'tau_index'),
    )

    def __repr__(self):
        return f"<SweepCell(run={self.run_id}, gamma={self.gamma}, tau={self.tau}, sync={self.synchronized})>"
