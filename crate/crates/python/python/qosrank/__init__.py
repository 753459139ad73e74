"""Rank cloud offer combinations by cost and measured network QoS."""

from ._native import Catalog, QosStore, rank_offers, weights

__all__ = ["Catalog", "QosStore", "rank_offers", "weights"]
