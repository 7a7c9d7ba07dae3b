#!/usr/bin/env python3
"""
Entry point for the QKD report service
"""

import uvicorn

from qkd_backend.config import get_settings
from qkd_backend.main import app

if __name__ == "__main__":
    settings = get_settings()
    uvicorn.run(app, host=settings.host, port=settings.port)
