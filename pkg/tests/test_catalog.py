"""Offer publication, search and selection.

Fixture-set rankings asserted here were derived by hand from the shipped
provider file: price ascending first, efficiency descending second,
distance third (beta XL costs 0.55 against alpha's 0.40; only the Berlin
site sits within 100 km of Berlin).
"""

from __future__ import annotations

import pytest

from ottbroker.attributes import GeoPoint, PerformanceClass, Requirement
from ottbroker.catalog import Catalog
from ottbroker.errors import DuplicateOffer, InUse, NotCustomerLayer, NotFound
from ottbroker.store import BrokerStore
from ottbroker.templates import TemplateStore

from test_templates import XL_EU_ATTRS, customer_template, provider_template

BERLIN = GeoPoint(52.52, 13.405)

XL_NEAR_BERLIN = Requirement(
    min_class=PerformanceClass.XL, near=(BERLIN, 100.0), target="VirtualMachine"
)


@pytest.fixture
def plane():
    store = BrokerStore()
    templates = TemplateStore(store)
    catalog = Catalog(store, templates)
    templates.register(provider_template())
    templates.register(customer_template())
    return templates, catalog


class TestPublish:
    def test_publish_fixture_chain(self, plane):
        _, catalog = plane
        offer = catalog.publish("off-1", "vm-xl-eu", "VirtualMachine")
        assert offer.provider_id == "alpha"
        assert offer.offer_id == "off-1"
        assert offer.published

    def test_provider_layer_rejected(self, plane):
        _, catalog = plane
        with pytest.raises(NotCustomerLayer):
            catalog.publish("off-x", "alpha-xl", "VirtualMachine")

    def test_duplicate_offer_id(self, plane):
        _, catalog = plane
        catalog.publish("off-1", "vm-xl-eu", "VirtualMachine")
        with pytest.raises(DuplicateOffer):
            catalog.publish("off-1", "vm-xl-eu", "VirtualMachine")

    def test_unknown_template(self, plane):
        _, catalog = plane
        with pytest.raises(NotFound):
            catalog.publish("off-x", "missing", "VirtualMachine")

    def test_offer_attributes_are_a_snapshot(self, plane):
        templates, catalog = plane
        offer = catalog.publish("off-1", "vm-xl-eu", "VirtualMachine")
        assert offer.attributes == XL_EU_ATTRS
        # republishing is the only way to pick up template changes
        assert catalog.get("off-1").attributes == XL_EU_ATTRS

    def test_published_offer_blocks_template_removal(self, plane):
        templates, catalog = plane
        catalog.publish("off-1", "vm-xl-eu", "VirtualMachine")
        with pytest.raises(InUse):
            templates.remove("vm-xl-eu")
        catalog.unpublish("off-1")
        templates.remove("vm-xl-eu")


class TestSearchStandardFixtures:
    def test_xl_near_berlin_is_exactly_the_berlin_edge_offer(self, runtime):
        ranked = runtime.catalog.search(XL_NEAR_BERLIN)
        assert [offer.offer_id for offer in ranked] == ["beta-berlin-xl"]

    def test_xl_near_berlin_wide_radius_ranking(self, runtime):
        req = Requirement(
            min_class=PerformanceClass.XL, near=(BERLIN, 600.0), target="VirtualMachine"
        )
        ranked = [offer.offer_id for offer in runtime.catalog.search(req)]
        assert ranked == ["alpha-frankfurt-xl", "beta-berlin-xl", "beta-munich-xl"]

    def test_impossible_requirement_is_empty(self, runtime):
        req = Requirement(
            min_class=PerformanceClass.XL, max_price_per_hour=0.0, target="VirtualMachine"
        )
        assert runtime.catalog.search(req) == []

    def test_network_link_routes_to_netco(self, runtime):
        req = Requirement(
            extra_constraints={"reliability": "high"}, target="NetworkLink"
        )
        ranked = runtime.catalog.search(req)
        assert [offer.offer_id for offer in ranked] == ["netco-berlin-link-1g"]
        assert ranked[0].provider_id == "netco"

    def test_no_near_means_location_free_order(self, runtime):
        req = Requirement(min_class=PerformanceClass.XL, target="VirtualMachine")
        ranked = [offer.offer_id for offer in runtime.catalog.search(req)]
        # alpha XL (0.40) at both sites by offerId, then beta XL (0.55)
        assert ranked == [
            "alpha-ashburn-xl",
            "alpha-frankfurt-xl",
            "beta-berlin-xl",
            "beta-munich-xl",
        ]

    def test_bootstrap_catalog_size(self, runtime):
        # alpha 2 sites x 4 packages, beta 2 x 2, netco 1
        assert len(runtime.catalog.list()) == 13


class TestSelect:
    def test_select_head(self, runtime):
        offer = runtime.catalog.select(XL_NEAR_BERLIN)
        assert offer is not None and offer.offer_id == "beta-berlin-xl"

    def test_select_none_on_empty_catalog(self):
        store = BrokerStore()
        catalog = Catalog(store, TemplateStore(store))
        assert catalog.select(XL_NEAR_BERLIN) is None

    def test_select_matches_search_head(self, runtime):
        req = Requirement(min_class=PerformanceClass.L, target="VirtualMachine")
        assert runtime.catalog.select(req).offer_id == runtime.catalog.search(req)[0].offer_id


class TestVisibility:
    def test_unpublished_offers_hidden_from_search(self, plane):
        _, catalog = plane
        catalog.publish("off-1", "vm-xl-eu", "VirtualMachine")
        req = Requirement(min_class=PerformanceClass.XL, target="VirtualMachine")
        assert [o.offer_id for o in catalog.search(req)] == ["off-1"]
        catalog.unpublish("off-1")
        assert catalog.search(req) == []
        assert [o.offer_id for o in catalog.list(include_unpublished=True)] == ["off-1"]

    def test_every_result_matches_and_is_published(self, runtime):
        from ottbroker.attributes import matches

        req = Requirement(min_class=PerformanceClass.M, target="VirtualMachine")
        for offer in runtime.catalog.search(req):
            assert offer.published
            assert offer.target == "VirtualMachine"
            assert matches(req, offer.attributes)
