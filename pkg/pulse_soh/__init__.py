# Copyright (c) 2026, The pulse-soh authors. All rights reserved.
"""State-of-health estimation from end-of-charge discharge pulses."""
