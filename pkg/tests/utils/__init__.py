# Copyright (c) 2026, The pulse-soh authors. All rights reserved.
"""Tests for utils.py file."""
