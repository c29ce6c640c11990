"""Tests for Sky-Lynx."""
