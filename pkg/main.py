"""
Главный файл CLI симулятора канала молекулярной связи
"""
import logging
import sys

from dotenv import load_dotenv
load_dotenv()

# Импорты модулей проекта
from cli_handlers import cli

logger = logging.getLogger(__name__)


def main() -> None:
    """Главная функция"""
    try:
        cli(obj={})
    except KeyboardInterrupt:
        logger.info("🛑 Остановлено пользователем")
        sys.exit(1)


if __name__ == "__main__":
    main()
