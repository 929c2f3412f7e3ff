"""
OpenTelemetry setup.
Pipelines open spans through the API tracer; without configure_telemetry() those
spans go to the no-op provider. When telemetry is enabled an SDK provider is
installed that exports to an OTLP collector, or to the console when no endpoint
is configured.
"""
import logging

from opentelemetry import trace

from src.config import Settings, settings

logger = logging.getLogger(__name__)

SERVICE_NAME = "magnon"


def get_tracer(name: str) -> trace.Tracer:
    """Tracer for a module; resolves the global provider at call time."""
    return trace.get_tracer(name)


def configure_telemetry(config: Settings = settings) -> bool:
    """
    Install the SDK tracer provider if telemetry is enabled.

    Args:
        config: Settings carrying the telemetry toggle and OTLP endpoint

    Returns:
        bool: True when a provider was installed
    """
    if not config.enable_telemetry:
        return False
    try:
        from opentelemetry.sdk.resources import Resource
        from opentelemetry.sdk.trace import TracerProvider
        from opentelemetry.sdk.trace.export import BatchSpanProcessor, ConsoleSpanExporter

        provider = TracerProvider(resource=Resource.create({"service.name": SERVICE_NAME}))
        if config.otlp_endpoint:
            from opentelemetry.exporter.otlp.proto.grpc.trace_exporter import OTLPSpanExporter

            exporter = OTLPSpanExporter(endpoint=config.otlp_endpoint)
        else:
            exporter = ConsoleSpanExporter()
        provider.add_span_processor(BatchSpanProcessor(exporter))
        trace.set_tracer_provider(provider)
        logger.info("OpenTelemetry tracing configured successfully")
        return True
    except Exception as e:
        logger.error(f"Failed to configure OpenTelemetry: {e}")
        return False
