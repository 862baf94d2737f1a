#!/usr/bin/env python
# -*- coding: utf-8 -*-
""" Runs the waterbag FEL tools from the command line.

    Examples:
        ./testFEL.py simulate --config configs/quadratic.cfg --out results/fig2
        ./testFEL.py compare --out results/fig2
        ./testFEL.py dispersion --delta-p 0.1
"""

# External modules
import sys

from fel.FELcli import main


if __name__ == '__main__':
    sys.exit(main())
