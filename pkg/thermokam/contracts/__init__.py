"""Contracts and schemas for thermokam runs."""
