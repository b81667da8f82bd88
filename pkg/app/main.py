import os

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from app.routers import experiments
from app.routers import presets
from app.routers import reports
from app.routers import cache_management
from app.startup import create_tables, startup_cache_initialization

app = FastAPI(title="Ricci Lab API")

# Add startup event handler for cache initialization
@app.on_event("startup")
async def startup_event():
    """Initialize caches and create database tables on application startup."""
    # Create database tables
    create_tables()

    # Initialize caches
    await startup_cache_initialization()

# Add CORS middleware
app.add_middleware(
    CORSMiddleware,
    allow_origins=os.getenv(
        "LAB_CORS_ORIGINS",
        "http://localhost:3000,http://127.0.0.1:3000,http://localhost:5173,http://127.0.0.1:5173"
    ).split(","),
    allow_credentials=True,
    allow_methods=["GET", "POST", "OPTIONS"],
    allow_headers=["*"],
)

app.include_router(experiments.router, prefix='/api/v1')
app.include_router(presets.router, prefix='/api/v1')
app.include_router(reports.router, prefix='/api/v1')
app.include_router(cache_management.router, prefix='/api/v1')

@app.get('/')
def read_root():
    return {'message': 'Welcome to the Ricci Lab API!'}
