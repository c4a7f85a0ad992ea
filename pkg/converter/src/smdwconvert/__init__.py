"""Checkpoint-to-SMDW conversion and golden fixture emission."""
