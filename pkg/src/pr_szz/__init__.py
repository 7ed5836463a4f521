"""
PR-SZZ - Pull-request-aware SZZ

Maps resolved bug tickets to bug-fixing commits using pull request data and traces the
commits that introduced the fixed lines. Ships the classic SZZ variants (B, AG, MA, L, R)
as baselines, a defect dataset writer and an evaluation harness.
"""

__version__ = "1.0.0"
__author__ = "PR-SZZ Team"
