"""Account administration guarded by role checks and signed session tokens."""

import hashlib
import hmac
import secrets


class AccessDenied(Exception):
    pass


class AccountStore:
    def __init__(self, signing_key=None):
        self.signing_key = signing_key or secrets.token_bytes(32)
        self.accounts = {}

    def add(self, name, role="user"):
        self.accounts[name] = {"role": role, "active": True}


def require_admin(store, actor):
    account = store.accounts.get(actor)
    if account is None or account["role"] != "admin" or not account["active"]:
        raise AccessDenied(f"{actor} is not an administrator")


def sign(store, name):
    return hmac.new(store.signing_key, name.encode("utf-8"), hashlib.sha256).hexdigest()


def issue_token(store, name):
    if name not in store.accounts:
        raise KeyError(name)
    return f"{name}:{sign(store, name)}"


def verify_token(store, token):
    name, _, mac = token.partition(":")
    if not name or not hmac.compare_digest(mac, sign(store, name)):
        raise AccessDenied("bad session token")
    return name


def delete_account(store, actor, target):
    require_admin(store, actor)
    return store.accounts.pop(target, None) is not None


def disable_account(store, actor, target):
    require_admin(store, actor)
    store.accounts[target]["active"] = False
