import os
from dotenv import load_dotenv

# Load environment variables from .env file
env_file = ".env.dev" if os.getenv("LAB_ENV") == "dev" else ".env.prod"
load_dotenv(env_file)

# Defaults for command-line runs; every one of them can be overridden by a flag
DEFAULT_WORKERS = int(os.getenv("LAB_WORKERS", "1"))
DEFAULT_OUT_DIR = os.getenv("LAB_OUT_DIR", "reports")
DEFAULT_SEED = int(os.getenv("LAB_SEED", "0"))

# Database configuration; with no DB_HOST the lab uses a local SQLite file
DB_HOST = os.getenv("DB_HOST")
DB_PORT = os.getenv("DB_PORT", "5432")
DB_NAME = os.getenv("DB_NAME")
DB_USER = os.getenv("DB_USER")
DB_PASSWORD = os.getenv("DB_PASSWORD")
SQLITE_PATH = os.getenv("LAB_SQLITE_PATH", "ricci_lab.db")
DB_ECHO = os.getenv("DB_ECHO", "false").lower() == "true"


def database_url() -> str:
    if DB_HOST:
        return f"postgresql://{DB_USER}:{DB_PASSWORD}@{DB_HOST}:{DB_PORT}/{DB_NAME}"
    return f"sqlite:///{SQLITE_PATH}"
