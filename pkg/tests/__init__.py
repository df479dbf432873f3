"""Tests for dpdm."""
