"""Strawberry harvesting fault diagnosis and recovery core."""

from ._harvest_guard import (
    IoError,
    ProtocolError,
    SlipModel,
    ValidationError,
    compensate,
    gen_dataset,
    grasp_actions,
    percent_two_decimals,
    relative_error,
    simulate,
    stability_actions,
    stratified_split_counts,
)

__all__ = [
    "IoError",
    "ProtocolError",
    "SlipModel",
    "ValidationError",
    "compensate",
    "gen_dataset",
    "grasp_actions",
    "percent_two_decimals",
    "relative_error",
    "simulate",
    "stability_actions",
    "stratified_split_counts",
]
