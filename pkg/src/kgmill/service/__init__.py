from kgmill.service.config import AppConfig, load_app_config
from kgmill.service.context import AppContext

__all__ = ["AppConfig", "load_app_config", "AppContext"]
