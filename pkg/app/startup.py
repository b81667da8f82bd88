"""
Startup logic for the Ricci lab API.

This module handles initialization tasks that need to run when the application starts:
creating the report table and warming the preset catalog cache.
"""

from app.cache import set_preset_catalog_cache, get_preset_catalog_from_cache
from app.database.connection import engine, Base
from app.lab.presets import preset_catalog
import app.models  # noqa: F401  registers the ORM tables on Base


def create_tables() -> None:
    try:
        Base.metadata.create_all(bind=engine)
        print(f"✅ Report tables ready on {engine.url.get_backend_name()}")
    except Exception as e:
        print(f"❌ Error creating report tables: {str(e)}")


async def startup_cache_initialization():
    """
    Initialize caches with default data on application startup.

    The preset catalog is pure, so it is built once and kept as a protected entry.
    """
    try:
        set_preset_catalog_cache(preset_catalog())
        cached_catalog = get_preset_catalog_from_cache()
        print("✅ Cache initialization completed successfully")
        print(f"✅ Cached preset catalog: {len(cached_catalog['models'])} models, "
              f"{len(cached_catalog['measures'])} measure presets")
    except Exception as e:
        print(f"❌ Error during cache initialization: {str(e)}")
        # Don't raise the exception to prevent app startup failure
