from fastapi import APIRouter, HTTPException
from typing import Any, Dict
from app.cache import get_preset_catalog_from_cache, set_preset_catalog_cache
from app.lab.presets import preset_catalog

router = APIRouter()


@router.get("/presets", summary="List model and measure presets", tags=["Presets"])
def get_presets() -> Dict[str, Any]:
    """
    Catalog of the built-in models and measure presets with their parameters.
    """
    try:
        cached_catalog = get_preset_catalog_from_cache()
        if cached_catalog is not None:
            return cached_catalog

        catalog = preset_catalog()
        set_preset_catalog_cache(catalog)
        return catalog
    except Exception as e:
        raise HTTPException(status_code=500, detail=f"Error building preset catalog: {str(e)}")
