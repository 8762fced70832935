import logging

from rest_framework import exceptions, generics, views
from rest_framework.permissions import IsAuthenticated
from rest_framework.response import Response
from rest_framework.status import HTTP_201_CREATED, HTTP_422_UNPROCESSABLE_ENTITY

from walkapp.exceptions import InvalidArgumentError, NumericalError
from walkapp.experiments import EXPERIMENTS, run_experiment
from walkapp.models import Run
from walkapp.permissions import IsOwner
from walkapp.serializers import RunSerializer, config_schema

logger = logging.getLogger(__name__)


class RunFilterAPIView(generics.GenericAPIView):
    """
    Filter runs by ``command`` and ``status`` and sort them with ``order_by``.

    Other query parameters are ignored, as is an ``order_by`` naming no sortable field.
    """
    filter_fields = ('command', 'status')
    ordering_fields = ('created', 'command', 'status')

    def filter_queryset(self, queryset):
        params = self.request.query_params
        options = {key: params[key] for key in self.filter_fields if params.get(key)}
        queryset = queryset.filter(**options)
        ordering = params.get('order_by', '')
        if ordering[ordering.startswith('-'):] in self.ordering_fields:
            queryset = queryset.order_by(ordering)
        return queryset


class RunList(RunFilterAPIView, generics.ListCreateAPIView):
    """
    Runs of the requesting user. POST executes the command synchronously and
    records its summary; nothing is written to disk.
    """
    queryset = Run.objects.all()
    serializer_class = RunSerializer
    permission_classes = (IsAuthenticated,)

    def get_queryset(self):
        return self.queryset.filter(owner=self.request.user)

    def create(self, request, *args, **kwargs):
        serializer = self.get_serializer(data=request.data)
        serializer.is_valid(raise_exception=True)
        command, config = serializer.validated_data['command'], serializer.validated_data['config']
        try:
            result = run_experiment(command, config)
        except InvalidArgumentError as e:
            raise exceptions.ValidationError(dict(config=[str(e)]))
        except NumericalError as e:
            logger.warning('run of %s failed: %s', command, e)
            serializer.save(owner=request.user, status=Run.FAILED, error=f'{type(e).__name__}: {e}')
            return Response(serializer.data, status=HTTP_422_UNPROCESSABLE_ENTITY)
        serializer.save(owner=request.user, status=Run.SUCCEEDED, summary=result.summary)
        headers = self.get_success_headers(serializer.data)
        return Response(serializer.data, status=HTTP_201_CREATED, headers=headers)


class RunDetail(generics.RetrieveDestroyAPIView):
    queryset = Run.objects.all()
    serializer_class = RunSerializer
    permission_classes = (IsAuthenticated, IsOwner)


class CommandList(views.APIView):
    """Available commands with their configuration schema."""
    permission_classes = (IsAuthenticated,)

    def get(self, request, *args, **kwargs):
        return Response({
            name: {'help': experiment.help, 'schema': config_schema(experiment.serializer_class)}
            for name, experiment in EXPERIMENTS.items()
        })
