import logging
from functools import wraps

import openai
from tenacity import RetryCallState, Retrying, retry_if_exception_type, stop_after_attempt, wait_exponential

from preguss.errors import GeneratorUnavailable

logger = logging.getLogger("preguss")

TRANSPORT_ERRORS = (openai.APIConnectionError, openai.RateLimitError, openai.InternalServerError)


def log_retry(retry_state: RetryCallState):
    error = retry_state.outcome.exception()
    logger.warning(
        f"LLM request failed ({type(error).__name__}: {error}), "
        f"attempt {retry_state.attempt_number}, retrying in {retry_state.next_action.sleep:.1f}s"
    )


def retry_transport(func):
    """Retries transport failures with exponential backoff; the generator's endpoint sets the budget."""
    @wraps(func)
    def wrapper(self, *args, **kwargs):
        endpoint = self.endpoint
        retrying = Retrying(
            stop=stop_after_attempt(endpoint.max_retries),
            wait=wait_exponential(multiplier=endpoint.backoff_seconds, max=30),
            retry=retry_if_exception_type(TRANSPORT_ERRORS),
            before_sleep=log_retry,
            reraise=True,
        )
        try:
            return retrying(func, self, *args, **kwargs)
        except TRANSPORT_ERRORS as error:
            logger.error(f"LLM endpoint {endpoint.base_url} unavailable after {endpoint.max_retries} attempts")
            raise GeneratorUnavailable(f"{endpoint.base_url}: {error}")
        except openai.APIError as error:
            logger.error(f"LLM endpoint {endpoint.base_url} refused the request: {error}")
            raise GeneratorUnavailable(f"{endpoint.base_url}: {error}")
    return wrapper
