from .token import MockIdentityProvider as IdentityProvider, TokenVerifier
