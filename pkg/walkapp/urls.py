from django.urls import path
from rest_framework.authtoken.views import obtain_auth_token
from rest_framework.urlpatterns import format_suffix_patterns

from walkapp import views

app_name = 'walkapp'
urlpatterns = [
    path('auth-token/', obtain_auth_token),

    path('runs/', views.RunList.as_view()),
    path('runs/<int:pk>/', views.RunDetail.as_view()),
    path('commands/', views.CommandList.as_view()),
]

urlpatterns = format_suffix_patterns(urlpatterns)
