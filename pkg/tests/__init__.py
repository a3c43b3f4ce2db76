"""Tests for morphoprot."""
