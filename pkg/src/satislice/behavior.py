"""Registry of 45 behavioral feature extractors over user records.

Four groups: profile (4), self_presentation (12), security_settings (3),
social_networking (26). Profile-map reads fall back to a per-feature
default (0 for flags and counts) and the miss is tallied when a
diagnostics dict is passed to extract_behavior. Demographic-style
features (gender, age, hometown) read platform-declared values from the
profile map rather than the corpus demographics fields.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import Callable, Iterable

from .corpus import Status, UserRecord
from .errors import DataValidationError

GROUP_SIZES = {
    "profile": 4,
    "self_presentation": 12,
    "security_settings": 3,
    "social_networking": 26,
}

DAY_SECONDS = 86400.0


@dataclass(frozen=True)
class FeatureSpec:
    feature_id: str
    group: str
    description: str
    default: float
    extractor: Callable[[UserRecord, datetime], float | None]


class BehaviorRegistry:
    """Ordered, arity-checked collection of behavioral extractors."""

    def __init__(self, features: Iterable[FeatureSpec]):
        self.features: tuple[FeatureSpec, ...] = tuple(features)
        ids = [f.feature_id for f in self.features]
        if len(ids) != len(set(ids)):
            raise DataValidationError("duplicate behavioral feature ids")
        counts = {group: 0 for group in GROUP_SIZES}
        for feature in self.features:
            if feature.group not in GROUP_SIZES:
                raise DataValidationError(f"unknown behavior group {feature.group!r}")
            counts[feature.group] += 1
        if counts != GROUP_SIZES:
            raise DataValidationError(f"behavior group arities {counts} != {GROUP_SIZES}")

    @property
    def feature_ids(self) -> tuple[str, ...]:
        return tuple(f.feature_id for f in self.features)

    def group_counts(self) -> dict[str, int]:
        counts = {group: 0 for group in GROUP_SIZES}
        for feature in self.features:
            counts[feature.group] += 1
        return counts

    def manifest(self) -> list[dict[str, object]]:
        return [
            {
                "feature_id": f.feature_id,
                "group": f.group,
                "description": f.description,
                "default": f.default,
            }
            for f in self.features
        ]


def extract_behavior(
    record: UserRecord,
    up_to: datetime,
    registry: BehaviorRegistry,
    missing_tally: dict[str, int] | None = None,
) -> dict[str, float]:
    """Apply every extractor to the record's history truncated at ``up_to``."""
    values: dict[str, float] = {}
    for feature in registry.features:
        value = feature.extractor(record, up_to)
        if value is None:
            if missing_tally is not None:
                missing_tally[feature.feature_id] = missing_tally.get(feature.feature_id, 0) + 1
            value = feature.default
        values[feature.feature_id] = float(value)
    return values


def _profile_number(key: str) -> Callable[[UserRecord, datetime], float | None]:
    def read(record: UserRecord, up_to: datetime) -> float | None:
        value = record.profile.get(key)
        if value is None:
            return None
        return float(value)

    return read


def _profile_flag(key: str) -> Callable[[UserRecord, datetime], float | None]:
    def read(record: UserRecord, up_to: datetime) -> float | None:
        value = record.profile.get(key)
        if value is None:
            return None
        return 1.0 if value else 0.0

    return read


def _history(record: UserRecord, up_to: datetime) -> list[Status]:
    return [s for s in record.statuses if s.posted_at <= up_to]


def _follower_friend_ratio(record: UserRecord, up_to: datetime) -> float | None:
    follower = record.profile.get("follower_count")
    friend = record.profile.get("friend_count")
    if follower is None or friend is None:
        return None
    friend = float(friend)
    return float(follower) / friend if friend else 0.0


def _status_count(record: UserRecord, up_to: datetime) -> float:
    return float(len(_history(record, up_to)))


def _statuses_per_day(record: UserRecord, up_to: datetime) -> float:
    days = max((up_to - record.registered_at).total_seconds() / DAY_SECONDS, 1.0)
    return len(_history(record, up_to)) / days


def _repost_count(record: UserRecord, up_to: datetime) -> float:
    return float(sum(1 for s in _history(record, up_to) if s.is_repost))


def _repost_ratio(record: UserRecord, up_to: datetime) -> float:
    history = _history(record, up_to)
    if not history:
        return 0.0
    return sum(1 for s in history if s.is_repost) / len(history)


def _original_count(record: UserRecord, up_to: datetime) -> float:
    return float(sum(1 for s in _history(record, up_to) if not s.is_repost))


def _char_count(char: str) -> Callable[[UserRecord, datetime], float]:
    def count(record: UserRecord, up_to: datetime) -> float:
        return float(sum(s.text.count(char) for s in _history(record, up_to)))

    return count


def _mentions_per_status(record: UserRecord, up_to: datetime) -> float:
    history = _history(record, up_to)
    if not history:
        return 0.0
    return sum(s.text.count("@") for s in history) / len(history)


def _link_count(record: UserRecord, up_to: datetime) -> float:
    return float(sum(s.text.count("http") for s in _history(record, up_to)))


def _mean_status_length(record: UserRecord, up_to: datetime) -> float:
    history = _history(record, up_to)
    if not history:
        return 0.0
    return sum(len(s.text) for s in history) / len(history)


def _max_status_length(record: UserRecord, up_to: datetime) -> float:
    return float(max((len(s.text) for s in _history(record, up_to)), default=0))


def _active_days(record: UserRecord, up_to: datetime) -> float:
    return float(len({s.posted_at.date() for s in _history(record, up_to)}))


def _posting_hour_entropy(record: UserRecord, up_to: datetime) -> float:
    history = _history(record, up_to)
    if not history:
        return 0.0
    bins = [0] * 24
    for status in history:
        bins[status.posted_at.hour] += 1
    total = len(history)
    return -sum((c / total) * math.log2(c / total) for c in bins if c)


def _night_post_ratio(record: UserRecord, up_to: datetime) -> float:
    history = _history(record, up_to)
    if not history:
        return 0.0
    night = sum(1 for s in history if s.posted_at.hour >= 22 or s.posted_at.hour < 6)
    return night / len(history)


def _weekend_post_ratio(record: UserRecord, up_to: datetime) -> float:
    history = _history(record, up_to)
    if not history:
        return 0.0
    weekend = sum(1 for s in history if s.posted_at.weekday() >= 5)
    return weekend / len(history)


def _days_since_last_post(record: UserRecord, up_to: datetime) -> float:
    history = _history(record, up_to)
    anchor = history[-1].posted_at if history else record.registered_at
    return max((up_to - anchor).total_seconds(), 0.0) / DAY_SECONDS


def _days_since_first_post(record: UserRecord, up_to: datetime) -> float:
    history = _history(record, up_to)
    if not history:
        return 0.0
    return (up_to - history[0].posted_at).total_seconds() / DAY_SECONDS


def _longest_gap_days(record: UserRecord, up_to: datetime) -> float:
    history = _history(record, up_to)
    if len(history) < 2:
        return 0.0
    gaps = (
        (b.posted_at - a.posted_at).total_seconds()
        for a, b in zip(history, history[1:])
    )
    return max(gaps) / DAY_SECONDS


def _recent_count(days: int) -> Callable[[UserRecord, datetime], float]:
    def count(record: UserRecord, up_to: datetime) -> float:
        start = up_to - timedelta(days=days)
        return float(
            sum(1 for s in record.statuses if start <= s.posted_at <= up_to)
        )

    return count


def _mean_gap_hours(record: UserRecord, up_to: datetime) -> float:
    history = _history(record, up_to)
    if len(history) < 2:
        return 0.0
    span = (history[-1].posted_at - history[0].posted_at).total_seconds()
    return span / (len(history) - 1) / 3600.0


def default_registry() -> BehaviorRegistry:
    """The versioned default registry; order defines feature-vector layout."""
    specs = [
        # profile: platform-declared basics, invariant in up_to
        FeatureSpec("declared_gender", "profile",
                    "gender code declared on the platform profile (profile key gender_code)",
                    0.0, _profile_number("gender_code")),
        FeatureSpec("declared_age", "profile",
                    "age in years declared on the platform profile (profile key age_years)",
                    0.0, _profile_number("age_years")),
        FeatureSpec("hometown_code", "profile",
                    "numeric hometown/region code from the profile (profile key hometown_code)",
                    0.0, _profile_number("hometown_code")),
        FeatureSpec("verified_account", "profile",
                    "1 when the account is verified (profile key verified)",
                    0.0, _profile_flag("verified")),
        # self-presentation: how the account is dressed up
        FeatureSpec("has_screen_name", "self_presentation",
                    "1 when a screen name is set (profile key screen_name_set)",
                    0.0, _profile_flag("screen_name_set")),
        FeatureSpec("has_avatar", "self_presentation",
                    "1 when an avatar is uploaded (profile key avatar_set)",
                    0.0, _profile_flag("avatar_set")),
        FeatureSpec("has_bio", "self_presentation",
                    "1 when a bio/description is filled in (profile key bio_set)",
                    0.0, _profile_flag("bio_set")),
        FeatureSpec("bio_length", "self_presentation",
                    "character length of the bio (profile key bio_length)",
                    0.0, _profile_number("bio_length")),
        FeatureSpec("has_profile_url", "self_presentation",
                    "1 when a personal URL is listed (profile key url_set)",
                    0.0, _profile_flag("url_set")),
        FeatureSpec("has_custom_domain", "self_presentation",
                    "1 when a vanity domain is configured (profile key domain_set)",
                    0.0, _profile_flag("domain_set")),
        FeatureSpec("has_cover_image", "self_presentation",
                    "1 when a cover/banner image is set (profile key cover_image_set)",
                    0.0, _profile_flag("cover_image_set")),
        FeatureSpec("tag_count", "self_presentation",
                    "number of self-description tags on the profile (profile key tag_count)",
                    0.0, _profile_number("tag_count")),
        FeatureSpec("has_location", "self_presentation",
                    "1 when a location string is filled in (profile key location_set)",
                    0.0, _profile_flag("location_set")),
        FeatureSpec("has_birthday", "self_presentation",
                    "1 when a birthday is public (profile key birthday_set)",
                    0.0, _profile_flag("birthday_set")),
        FeatureSpec("screen_name_length", "self_presentation",
                    "character length of the screen name (profile key screen_name_length)",
                    0.0, _profile_number("screen_name_length")),
        FeatureSpec("has_education", "self_presentation",
                    "1 when education info is listed (profile key education_set)",
                    0.0, _profile_flag("education_set")),
        # security settings: privacy posture
        FeatureSpec("comments_open", "security_settings",
                    "1 when strangers may comment (profile key comments_open)",
                    0.0, _profile_flag("comments_open")),
        FeatureSpec("messages_open", "security_settings",
                    "1 when strangers may send messages (profile key messages_open)",
                    0.0, _profile_flag("messages_open")),
        FeatureSpec("geo_sharing_on", "security_settings",
                    "1 when geotagging of posts is enabled (profile key geo_enabled)",
                    0.0, _profile_flag("geo_enabled")),
        # social networking: connections plus status-derived interaction
        FeatureSpec("friend_count", "social_networking",
                    "number of accounts followed (profile key friend_count)",
                    0.0, _profile_number("friend_count")),
        FeatureSpec("follower_count", "social_networking",
                    "number of followers (profile key follower_count)",
                    0.0, _profile_number("follower_count")),
        FeatureSpec("follower_friend_ratio", "social_networking",
                    "follower_count / friend_count, 0 when friend_count is 0",
                    0.0, _follower_friend_ratio),
        FeatureSpec("bi_follow_count", "social_networking",
                    "number of mutual follows (profile key bi_follow_count)",
                    0.0, _profile_number("bi_follow_count")),
        FeatureSpec("favourites_count", "social_networking",
                    "number of favourited posts (profile key favourites_count)",
                    0.0, _profile_number("favourites_count")),
        FeatureSpec("status_count", "social_networking",
                    "statuses posted up to the cutoff", 0.0, _status_count),
        FeatureSpec("statuses_per_day", "social_networking",
                    "statuses per day of account age at the cutoff", 0.0, _statuses_per_day),
        FeatureSpec("repost_count", "social_networking",
                    "reposted statuses up to the cutoff", 0.0, _repost_count),
        FeatureSpec("repost_ratio", "social_networking",
                    "share of statuses that are reposts", 0.0, _repost_ratio),
        FeatureSpec("original_count", "social_networking",
                    "original (non-repost) statuses up to the cutoff", 0.0, _original_count),
        FeatureSpec("mention_count", "social_networking",
                    "total '@' mentions across status texts", 0.0, _char_count("@")),
        FeatureSpec("mentions_per_status", "social_networking",
                    "mean '@' mentions per status", 0.0, _mentions_per_status),
        FeatureSpec("hashtag_count", "social_networking",
                    "total '#' topic markers across status texts", 0.0, _char_count("#")),
        FeatureSpec("link_count", "social_networking",
                    "total 'http' link occurrences across status texts", 0.0, _link_count),
        FeatureSpec("mean_status_length", "social_networking",
                    "mean status text length in characters", 0.0, _mean_status_length),
        FeatureSpec("max_status_length", "social_networking",
                    "longest status text length in characters", 0.0, _max_status_length),
        FeatureSpec("active_days", "social_networking",
                    "distinct UTC dates with at least one status", 0.0, _active_days),
        FeatureSpec("posting_hour_entropy", "social_networking",
                    "Shannon entropy (bits) of the posting-hour histogram",
                    0.0, _posting_hour_entropy),
        FeatureSpec("night_post_ratio", "social_networking",
                    "share of statuses posted 22:00-06:00 UTC", 0.0, _night_post_ratio),
        FeatureSpec("weekend_post_ratio", "social_networking",
                    "share of statuses posted on Saturday/Sunday", 0.0, _weekend_post_ratio),
        FeatureSpec("days_since_last_post", "social_networking",
                    "days from the latest status (or registration when silent) to the cutoff",
                    0.0, _days_since_last_post),
        FeatureSpec("days_since_first_post", "social_networking",
                    "days from the first status to the cutoff, 0 with no history",
                    0.0, _days_since_first_post),
        FeatureSpec("longest_gap_days", "social_networking",
                    "longest silence between consecutive statuses, in days",
                    0.0, _longest_gap_days),
        FeatureSpec("recent_30d_count", "social_networking",
                    "statuses in the 30 days before the cutoff", 0.0, _recent_count(30)),
        FeatureSpec("recent_7d_count", "social_networking",
                    "statuses in the 7 days before the cutoff", 0.0, _recent_count(7)),
        FeatureSpec("mean_gap_hours", "social_networking",
                    "mean hours between consecutive statuses", 0.0, _mean_gap_hours),
    ]
    return BehaviorRegistry(specs)
