"""Quaternion-valued Retinex decomposition."""
