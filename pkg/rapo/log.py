import logging

from rapo.config import settings


logging.basicConfig(
    level=str(settings.log_level).upper(),
    format="%(asctime)s %(levelname)s %(name)s: %(message)s",
)
logger = logging.getLogger("rapo")
