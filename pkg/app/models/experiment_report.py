from sqlalchemy import Column, Integer, String, DateTime, Boolean, Text
from datetime import datetime
from app.database.connection import Base

class ExperimentReport(Base):
    __tablename__ = 'experiment_reports'

    # SHA256 of the canonical config, so re-running a config overwrites its row
    id = Column(String(64), primary_key=True)
    command = Column(String(64), nullable=False, index=True)
    passed = Column(Boolean, nullable=False)
    exit_code = Column(Integer, nullable=False)
    report_json = Column(Text, nullable=False)
    created_at = Column(DateTime, nullable=False, default=datetime.utcnow)

    def __repr__(self):
        return f"<ExperimentReport(id='{self.id[:12]}', command='{self.command}', passed={self.passed})>"
