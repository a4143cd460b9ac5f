# Tests for core app
