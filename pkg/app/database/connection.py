from sqlalchemy import create_engine
from sqlalchemy.orm import sessionmaker, declarative_base

from app.settings import DB_ECHO, database_url

DATABASE_URL = database_url()


def engine_connect_args(url: str) -> dict:
    """
    Driver arguments for the engine.

    SQLite refuses connections opened on another thread by default, and
    FastAPI runs sync endpoints in a threadpool; PostgreSQL needs nothing extra.
    """
    if url.startswith("sqlite"):
        return {"check_same_thread": False}
    return {}


# Create the SQLAlchemy engine
engine = create_engine(DATABASE_URL, echo=DB_ECHO, connect_args=engine_connect_args(DATABASE_URL))

# Create a session factory
SessionLocal = sessionmaker(autocommit=False, autoflush=False, bind=engine)

# Base class for ORM models
Base = declarative_base()

# Dependency to provide a database session
def get_connection():
    """
    Dependency that provides a SQLAlchemy session.
    """
    db = SessionLocal()
    try:
        yield db
    finally:
        db.close()
